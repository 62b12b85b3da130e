#pragma once

#include <cstdint>
#include <vector>

#include "mcu/data.hpp"
#include "mcu/mlp.hpp"
#include "mcu/rng.hpp"
#include "mcu/tensor.hpp"

namespace testing {

inline mcu::Tensor random_tensor(mcu::Shape shape, std::uint64_t seed, double scale = 1.0) {
  mcu::Tensor t(std::move(shape));
  mcu::Rng rng(seed);
  for (auto& v : t.data) v = static_cast<float>(scale * rng.normal());
  return t;
}

inline std::vector<int> random_labels(std::size_t n, std::size_t classes, std::uint64_t seed) {
  mcu::Rng rng(seed);
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng.below(classes));
  return y;
}

inline std::vector<double> to_double(const std::vector<float>& v) {
  return std::vector<double>(v.begin(), v.end());
}

/// Seeded two-moons split used across the unit tests.
inline mcu::SplitDataset moons_split(std::size_t n = 200, double noise = 0.1,
                                     double forget_fraction = 0.05, std::uint64_t seed = 0) {
  return mcu::split_forget_retain(mcu::make_moons(n, noise, seed), forget_fraction, 0.2, seed + 1);
}

inline mcu::MlpArch small_arch(std::size_t in = 2, std::size_t hidden = 8, std::size_t out = 2,
                               mcu::Activation act = mcu::Activation::relu) {
  return mcu::MlpArch{{in, hidden, out}, act};
}

}  // namespace testing
