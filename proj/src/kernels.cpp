#include "mcu/kernels.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace mcu::kernels {

void matmul(std::span<const float> a, std::span<const float> b, std::span<float> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelThreshold)
  for (long long ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    std::vector<double> acc(n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const float* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += aip * static_cast<double>(brow[j]);
    }
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = static_cast<float>(acc[j]);
  }
}

void matmul_reference(std::span<const float> a, std::span<const float> b, std::span<float> c,
                      std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        acc += static_cast<double>(a[i * k + p]) * static_cast<double>(b[p * n + j]);
      }
      c[i * n + j] = static_cast<float>(acc);
    }
  }
}

namespace {

void log_softmax_row(const float* x, float* y, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, static_cast<double>(x[j]));
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += std::exp(static_cast<double>(x[j]) - mx);
  const double lse = mx + std::log(s);
  for (std::size_t j = 0; j < n; ++j) y[j] = static_cast<float>(static_cast<double>(x[j]) - lse);
}

}  // namespace

void log_softmax_rows(std::span<const float> x, std::span<float> y, std::size_t m, std::size_t n) {
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (m * n >= kParallelThreshold)
  for (long long i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    log_softmax_row(x.data() + r * n, y.data() + r * n, n);
  }
}

void log_softmax_rows_reference(std::span<const float> x, std::span<float> y, std::size_t m,
                                std::size_t n) {
  for (std::size_t r = 0; r < m; ++r) log_softmax_row(x.data() + r * n, y.data() + r * n, n);
}

void sum_rows(std::span<const float> x, std::span<float> out, std::size_t m, std::size_t n) {
  const auto cols = static_cast<long long>(n);
#pragma omp parallel for schedule(static) if (m * n >= kParallelThreshold)
  for (long long jj = 0; jj < cols; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += x[i * n + j];
    out[j] = static_cast<float>(acc);
  }
}

void sum_rows_reference(std::span<const float> x, std::span<float> out, std::size_t m,
                        std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += x[i * n + j];
    out[j] = static_cast<float>(acc);
  }
}

}  // namespace mcu::kernels
