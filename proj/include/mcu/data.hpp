#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcu/tensor.hpp"

namespace mcu {

/// Features [n, d] with integer class labels.
struct Dataset {
  Tensor features;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.rank() == 2 ? features.shape[1] : 0; }
  std::vector<std::size_t> class_counts() const;
};

/// A dataset with disjoint forget / retain / test index sets (each sorted).
struct SplitDataset {
  Dataset data;
  std::vector<std::size_t> forget_idx;
  std::vector<std::size_t> retain_idx;
  std::vector<std::size_t> test_idx;

  std::size_t train_size() const { return forget_idx.size() + retain_idx.size(); }
  /// forget ∪ retain, sorted.
  std::vector<std::size_t> train_idx() const;

  Tensor gather_features(std::span<const std::size_t> idx) const;
  std::vector<int> gather_labels(std::span<const std::size_t> idx) const;
  static std::vector<int> gather(std::span<const int> labels, std::span<const std::size_t> idx);

  /// Throws ContractViolation if the index sets overlap, repeat, or fall outside the data.
  void validate() const;
};

/// Two interleaving unit half-circles, class 0 on the upper arc centred at the
/// origin and class 1 on the lower arc centred at (1, 0.5), plus N(0, noise²).
Dataset make_moons(std::size_t n, double noise, std::uint64_t seed);

/// Isotropic 2-D Gaussian clusters. Centres sit on a circle of radius 3 at equal
/// angular spacing with a seeded rotation; class of sample i is i mod classes
/// before shuffling.
Dataset make_blobs(std::size_t n, std::size_t classes, double spread, std::uint64_t seed);

struct IdxLoad {
  Dataset data;
  /// Set when `limit` exceeded the number of examples in the files.
  bool limit_clamped = false;
};

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled to [0, 1]; images are flattened to rows.
IdxLoad load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t limit);

/// Test indices are drawn first from a seeded permutation; the forget set is a
/// uniform random subset of the remaining training indices.
SplitDataset split_forget_retain(const Dataset& ds, double forget_fraction,
                                 double test_fraction, std::uint64_t seed);

/// For each index in `idx_set` (in order) draws r = below(classes - 1) and maps
/// it past the original label: new = r < y ? r : r + 1. Other labels unchanged.
std::vector<int> corrupt_labels(std::span<const int> labels, std::size_t num_classes,
                                std::span<const std::size_t> idx_set, std::uint64_t seed);

}  // namespace mcu
