#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mcu {

/// Portable SplitMix64 generator.
///
/// State update: state += 0x9E3779B97F4A7C15; the output is the state passed
/// through the finalizer z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB; z ^= z >> 31.
///
/// Derived draws are fixed so that any implementation can replay them:
///   uniform()      = (next() >> 11) * 2^-53, in [0, 1)
///   below(n)       = rejection sampling on next(): draws x until
///                    x < 2^64 - (2^64 mod n), returns x mod n
///   normal()       = Box-Muller cosine branch, u1 = 1 - uniform(), u2 = uniform()
///   rademacher()   = +1 if the top bit of next() is set, else -1
///   shuffle(v)     = Fisher-Yates from the back: for i = n-1 .. 1, swap(v[i], v[below(i+1)])
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  double uniform();
  std::uint64_t below(std::uint64_t n);
  double normal();
  float rademacher();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

/// Mixes a stream tag into a seed so that sub-generators are independent.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mcu
