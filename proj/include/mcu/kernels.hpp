#pragma once

#include <cstddef>
#include <span>

// Inner loops shared by the autodiff ops and the evaluation path.
//
// Each kernel has an OpenMP-parallel version and a `_reference` serial version.
// The parallel versions partition output elements across threads and keep the
// per-element reduction order of the reference, so both produce bit-identical
// results. Reductions accumulate in double and round once on store.
namespace mcu::kernels {

/// c[m,n] = a[m,k] * b[k,n]
void matmul(std::span<const float> a, std::span<const float> b, std::span<float> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_reference(std::span<const float> a, std::span<const float> b, std::span<float> c,
                      std::size_t m, std::size_t k, std::size_t n);

/// Row-wise log-softmax of x[m,n], log-sum-exp stabilized.
void log_softmax_rows(std::span<const float> x, std::span<float> y, std::size_t m, std::size_t n);
void log_softmax_rows_reference(std::span<const float> x, std::span<float> y, std::size_t m,
                                std::size_t n);

/// Column sums of x[m,n] into out[n].
void sum_rows(std::span<const float> x, std::span<float> out, std::size_t m, std::size_t n);
void sum_rows_reference(std::span<const float> x, std::span<float> out, std::size_t m,
                        std::size_t n);

/// Minimum flop count before a kernel opens a parallel region.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

}  // namespace mcu::kernels
