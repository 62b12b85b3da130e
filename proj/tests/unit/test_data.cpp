#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "mcu/data.hpp"
#include "mcu/error.hpp"
#include "mcu/rng.hpp"
#include "support/oracles.hpp"

using Catch::Matchers::WithinAbs;

namespace fs = std::filesystem;

namespace {

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

struct IdxFiles {
  fs::path dir;
  std::string images, labels;

  IdxFiles(std::uint32_t count, std::uint32_t image_magic = 0x803, std::size_t drop_bytes = 0) {
    dir = fs::temp_directory_path() / ("mcu_idx_" + std::to_string(count) + "_" +
                                       std::to_string(image_magic) + "_" + std::to_string(drop_bytes));
    fs::create_directories(dir);
    images = (dir / "images.idx").string();
    labels = (dir / "labels.idx").string();
    std::vector<unsigned char> pixels(count * 28 * 28);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<unsigned char>(i % 256);
    {
      std::ofstream out(images, std::ios::binary);
      write_be32(out, image_magic);
      write_be32(out, count);
      write_be32(out, 28);
      write_be32(out, 28);
      out.write(reinterpret_cast<const char*>(pixels.data()),
                static_cast<std::streamsize>(pixels.size() - drop_bytes));
    }
    std::ofstream out(labels, std::ios::binary);
    write_be32(out, 0x801);
    write_be32(out, count);
    for (std::uint32_t i = 0; i < count; ++i) out.put(static_cast<char>(i % 10));
  }
  ~IdxFiles() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("SplitMix64 reproduces the published test vector") {
  mcu::Rng rng(0);
  CHECK(rng.next() == 0xE220A8397B1DCDAFULL);
  CHECK(rng.next() == 0x6E789E6AA1B965F4ULL);
  CHECK(rng.next() == 0x06C45D188009454FULL);
  oracle::SplitMix ref{1234};
  mcu::Rng same(1234);
  for (int i = 0; i < 100; ++i) CHECK(same.below(7) == ref.below(7));
}

TEST_CASE("rng draws stay in range") {
  mcu::Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(rng.below(3) < 3);
    const float r = rng.rademacher();
    CHECK((r == 1.0f || r == -1.0f));
  }
  CHECK(mcu::derive_seed(1, 2) != mcu::derive_seed(1, 3));
  CHECK(mcu::derive_seed(1, 2) == mcu::derive_seed(1, 2));
}

TEST_CASE("make_moons without noise lies on the arcs and is balanced") {
  const auto ds = mcu::make_moons(200, 0.0, 3);
  CHECK(ds.class_counts() == std::vector<std::size_t>{100, 100});
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double x = ds.features.at(i, 0), y = ds.features.at(i, 1);
    if (ds.labels[i] == 0) {
      CHECK_THAT(x * x + y * y, WithinAbs(1.0, 1e-6));
      CHECK(y >= -1e-7);
    } else {
      CHECK_THAT((x - 1) * (x - 1) + (y - 0.5) * (y - 0.5), WithinAbs(1.0, 1e-6));
      CHECK(y <= 0.5 + 1e-7);
    }
  }
}

TEST_CASE("make_moons is deterministic per seed and validates its input") {
  CHECK(mcu::make_moons(100, 0.1, 4).features.data == mcu::make_moons(100, 0.1, 4).features.data);
  CHECK(mcu::make_moons(100, 0.1, 4).features.data != mcu::make_moons(100, 0.1, 5).features.data);
  CHECK_THROWS_AS(mcu::make_moons(3, 0.1, 0), mcu::ConfigError);
  CHECK_THROWS_AS(mcu::make_moons(10, -1.0, 0), mcu::ConfigError);
}

TEST_CASE("make_blobs balance and zero spread") {
  CHECK(mcu::make_blobs(90, 3, 0.5, 1).class_counts() == std::vector<std::size_t>{30, 30, 30});
  const auto counts = mcu::make_blobs(91, 3, 0.5, 1).class_counts();
  CHECK(*std::max_element(counts.begin(), counts.end()) -
            *std::min_element(counts.begin(), counts.end()) <=
        1);
  const auto ds = mcu::make_blobs(30, 3, 0.0, 2);
  for (int c = 0; c < 3; ++c) {
    std::set<std::pair<float, float>> centres;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] == c) centres.insert({ds.features.at(i, 0), ds.features.at(i, 1)});
    }
    CHECK(centres.size() == 1);
    const auto [x, y] = *centres.begin();
    CHECK_THAT(std::hypot(x, y), WithinAbs(3.0, 1e-5));
  }
  CHECK_THROWS_AS(mcu::make_blobs(10, 1, 0.5, 0), mcu::ConfigError);
}

TEST_CASE("split sizes, disjointness and determinism") {
  const auto ds = mcu::make_moons(250, 0.1, 0);
  const auto s = mcu::split_forget_retain(ds, 0.05, 0.2, 7);
  CHECK(s.test_idx.size() == 50);
  CHECK(s.forget_idx.size() == 10);
  CHECK(s.retain_idx.size() == 190);
  CHECK_NOTHROW(s.validate());
  std::set<std::size_t> all;
  for (const auto* v : {&s.forget_idx, &s.retain_idx, &s.test_idx}) all.insert(v->begin(), v->end());
  CHECK(all.size() == 250);
  const auto again = mcu::split_forget_retain(ds, 0.05, 0.2, 7);
  CHECK(again.forget_idx == s.forget_idx);
  CHECK(again.test_idx == s.test_idx);

  const auto two = mcu::split_forget_retain(mcu::make_moons(200, 0.1, 0), 0.02, 0.0, 1);
  CHECK(two.forget_idx.size() == 4);
  CHECK(two.retain_idx.size() == 196);

  CHECK_THROWS_AS(mcu::split_forget_retain(ds, 0.0, 0.2, 0), mcu::ConfigError);
  CHECK_THROWS_AS(mcu::split_forget_retain(ds, 0.1, 1.0, 0), mcu::ConfigError);
}

TEST_CASE("forget fraction holds within one sample across the grid") {
  const auto ds = mcu::make_moons(400, 0.1, 0);
  for (double f : {0.02, 0.04, 0.06, 0.08, 0.10}) {
    const auto s = mcu::split_forget_retain(ds, f, 0.2, 3);
    const double train = static_cast<double>(s.train_size());
    CHECK(std::abs(static_cast<double>(s.forget_idx.size()) - f * train) <= 1.0);
  }
}

TEST_CASE("validate rejects overlapping index sets") {
  auto s = mcu::split_forget_retain(mcu::make_moons(40, 0.1, 0), 0.1, 0.2, 0);
  s.retain_idx.push_back(s.forget_idx.front());
  CHECK_THROWS_AS(s.validate(), mcu::ContractViolation);
}

TEST_CASE("corrupt_labels flips two-class labels and leaves others alone") {
  const std::vector<int> labels{0, 1, 1, 0, 1};
  const std::vector<std::size_t> idx{1, 3};
  const auto out = mcu::corrupt_labels(labels, 2, idx, 9);
  CHECK(out == std::vector<int>{0, 0, 1, 1, 1});
  CHECK_THROWS_AS(mcu::corrupt_labels(labels, 1, idx, 9), mcu::ConfigError);
}

TEST_CASE("corrupt_labels replays the documented draw on three classes") {
  std::vector<int> labels(60);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < labels.size(); i += 2) idx.push_back(i);
  const auto out = mcu::corrupt_labels(labels, 3, idx, 77);
  oracle::SplitMix ref{77};
  auto want = labels;
  for (auto i : idx) {
    const int r = static_cast<int>(ref.below(2));
    want[i] = r < labels[i] ? r : r + 1;
  }
  CHECK(out == want);
  for (auto i : idx) CHECK(out[i] != labels[i]);
}

TEST_CASE("load_idx reads headers, scales pixels and clamps the limit") {
  IdxFiles files(3);
  const auto two = mcu::load_idx(files.images, files.labels, 2);
  CHECK(two.data.features.shape == mcu::Shape{2, 784});
  CHECK_FALSE(two.limit_clamped);
  CHECK(two.data.features.data[255] == 1.0f);
  CHECK(two.data.features.data[0] == 0.0f);
  CHECK(two.data.labels == std::vector<int>{0, 1});
  const auto all = mcu::load_idx(files.images, files.labels, 10);
  CHECK(all.data.size() == 3);
  CHECK(all.limit_clamped);
}

TEST_CASE("load_idx names bad magic and truncation") {
  IdxFiles bad(2, 0x804);
  try {
    mcu::load_idx(bad.images, bad.labels, 2);
    FAIL("expected a format error");
  } catch (const mcu::FormatError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("00000804"));
  }
  IdxFiles cut(2, 0x803, 10);
  CHECK_THROWS_AS(mcu::load_idx(cut.images, cut.labels, 2), mcu::IoError);
}
