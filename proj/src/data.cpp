#include "mcu/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mcu/error.hpp"
#include "mcu/rng.hpp"

namespace mcu {

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

std::vector<std::size_t> SplitDataset::train_idx() const {
  std::vector<std::size_t> out;
  out.reserve(train_size());
  std::merge(forget_idx.begin(), forget_idx.end(), retain_idx.begin(), retain_idx.end(),
             std::back_inserter(out));
  return out;
}

Tensor SplitDataset::gather_features(std::span<const std::size_t> idx) const {
  const std::size_t d = data.dim();
  Tensor out(Shape{idx.size(), d});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy_n(data.features.data.begin() + static_cast<std::ptrdiff_t>(idx[r] * d), d,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  return out;
}

std::vector<int> SplitDataset::gather(std::span<const int> labels,
                                      std::span<const std::size_t> idx) {
  std::vector<int> out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) out[r] = labels[idx[r]];
  return out;
}

std::vector<int> SplitDataset::gather_labels(std::span<const std::size_t> idx) const {
  return gather(data.labels, idx);
}

void SplitDataset::validate() const {
  std::vector<char> seen(data.size(), 0);
  auto mark = [&](const std::vector<std::size_t>& set, const char* name) {
    for (auto i : set) {
      if (i >= data.size()) {
        throw ContractViolation(std::string(name) + " index " + std::to_string(i) +
                                " outside the dataset");
      }
      if (seen[i]) {
        throw ContractViolation(std::string(name) + " index " + std::to_string(i) +
                                " appears in more than one split");
      }
      seen[i] = 1;
    }
  };
  mark(forget_idx, "forget");
  mark(retain_idx, "retain");
  mark(test_idx, "test");
}

Dataset make_moons(std::size_t n, double noise, std::uint64_t seed) {
  if (n < 4) throw ConfigError("make_moons needs n >= 4, got " + std::to_string(n));
  if (!(noise >= 0.0)) throw ConfigError("make_moons noise must be >= 0");
  Rng rng(seed);
  const std::size_t n_outer = n / 2;
  const std::size_t n_inner = n - n_outer;
  std::vector<double> xs, ys;
  std::vector<int> labels;
  auto angle = [](std::size_t i, std::size_t count) {
    return count > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1)
                     : 0.0;
  };
  for (std::size_t i = 0; i < n_outer; ++i) {
    const double a = angle(i, n_outer);
    xs.push_back(std::cos(a));
    ys.push_back(std::sin(a));
    labels.push_back(0);
  }
  for (std::size_t i = 0; i < n_inner; ++i) {
    const double a = angle(i, n_inner);
    xs.push_back(1.0 - std::cos(a));
    ys.push_back(1.0 - std::sin(a) - 0.5);
    labels.push_back(1);
  }
  if (noise > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] += noise * rng.normal();
      ys[i] += noise * rng.normal();
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  Dataset ds;
  ds.num_classes = 2;
  ds.features = Tensor(Shape{n, 2});
  ds.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    ds.features.data[2 * r] = static_cast<float>(xs[order[r]]);
    ds.features.data[2 * r + 1] = static_cast<float>(ys[order[r]]);
    ds.labels[r] = labels[order[r]];
  }
  return ds;
}

Dataset make_blobs(std::size_t n, std::size_t classes, double spread, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("make_blobs needs classes >= 2");
  if (n < classes) throw ConfigError("make_blobs needs n >= classes");
  if (!(spread >= 0.0)) throw ConfigError("make_blobs spread must be >= 0");
  Rng rng(seed);
  const double rotation = 2.0 * std::numbers::pi * rng.uniform();
  std::vector<double> cx(classes), cy(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    const double a = rotation + 2.0 * std::numbers::pi * static_cast<double>(k) /
                                    static_cast<double>(classes);
    cx[k] = 3.0 * std::cos(a);
    cy[k] = 3.0 * std::sin(a);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  Dataset ds;
  ds.num_classes = classes;
  ds.features = Tensor(Shape{n, 2});
  ds.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t k = order[r] % classes;
    double x = cx[k], y = cy[k];
    if (spread > 0.0) {
      x += spread * rng.normal();
      y += spread * rng.normal();
    }
    ds.features.data[2 * r] = static_cast<float>(x);
    ds.features.data[2 * r + 1] = static_cast<float>(y);
    ds.labels[r] = static_cast<int>(k);
  }
  return ds;
}

namespace {

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t at,
                        const std::string& path) {
  if (at + 4 > b.size()) throw TruncatedFileError("truncated IDX header in '" + path + "'");
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

std::string hex_magic(std::uint32_t magic) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << magic;
  return os.str();
}

}  // namespace

IdxLoad load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t limit) {
  const auto img = read_all(images_path);
  const auto lab = read_all(labels_path);

  const std::uint32_t img_magic = read_be32(img, 0, images_path);
  if (img_magic != 0x00000803u) {
    throw FormatError("bad IDX image magic " + hex_magic(img_magic) + " in '" + images_path +
                      "' (expected 0x00000803)");
  }
  const std::uint32_t lab_magic = read_be32(lab, 0, labels_path);
  if (lab_magic != 0x00000801u) {
    throw FormatError("bad IDX label magic " + hex_magic(lab_magic) + " in '" + labels_path +
                      "' (expected 0x00000801)");
  }
  const std::size_t count = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t label_count = read_be32(lab, 4, labels_path);
  if (label_count != count) {
    throw FormatError("IDX image count " + std::to_string(count) + " differs from label count " +
                      std::to_string(label_count));
  }
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + count * pixels) {
    throw TruncatedFileError("truncated IDX image payload in '" + images_path + "'");
  }
  if (lab.size() < 8 + count) {
    throw TruncatedFileError("truncated IDX label payload in '" + labels_path + "'");
  }

  IdxLoad out;
  const std::size_t n = std::min(limit, count);
  out.limit_clamped = limit > count;
  out.data.features = Tensor(Shape{n, pixels});
  out.data.labels.resize(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) {
      out.data.features.data[i * pixels + p] = static_cast<float>(img[16 + i * pixels + p]) / 255.0f;
    }
    out.data.labels[i] = lab[8 + i];
    max_label = std::max(max_label, out.data.labels[i]);
  }
  out.data.num_classes = std::max<std::size_t>(2, static_cast<std::size_t>(max_label) + 1);
  return out;
}

SplitDataset split_forget_retain(const Dataset& ds, double forget_fraction,
                                 double test_fraction, std::uint64_t seed) {
  if (!(forget_fraction > 0.0 && forget_fraction < 1.0)) {
    throw ConfigError("forget_fraction must lie in (0, 1), got " + std::to_string(forget_fraction));
  }
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in [0, 1), got " + std::to_string(test_fraction));
  }
  const std::size_t n = ds.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);

  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  const std::size_t n_train = n - n_test;
  if (n_train < 2) throw ConfigError("split leaves fewer than 2 training samples");
  auto n_forget =
      static_cast<std::size_t>(std::llround(forget_fraction * static_cast<double>(n_train)));
  n_forget = std::clamp<std::size_t>(n_forget, 1, n_train - 1);

  SplitDataset out;
  out.data = ds;
  out.test_idx.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  auto train_begin = perm.begin() + static_cast<std::ptrdiff_t>(n_test);
  out.forget_idx.assign(train_begin, train_begin + static_cast<std::ptrdiff_t>(n_forget));
  out.retain_idx.assign(train_begin + static_cast<std::ptrdiff_t>(n_forget), perm.end());
  std::sort(out.test_idx.begin(), out.test_idx.end());
  std::sort(out.forget_idx.begin(), out.forget_idx.end());
  std::sort(out.retain_idx.begin(), out.retain_idx.end());
  return out;
}

std::vector<int> corrupt_labels(std::span<const int> labels, std::size_t num_classes,
                                std::span<const std::size_t> idx_set, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("corrupt_labels is unsupported with a single class");
  std::vector<int> out(labels.begin(), labels.end());
  Rng rng(seed);
  for (auto i : idx_set) {
    if (i >= out.size()) throw IndexError("corrupt_labels index " + std::to_string(i) + " out of range");
    const auto r = static_cast<int>(rng.below(num_classes - 1));
    out[i] = r < labels[i] ? r : r + 1;
  }
  return out;
}

}  // namespace mcu
