// Seeded, platform-independent random stream.
//
// std::mt19937_64 has a fully specified output sequence, but the standard
// distributions do not, so the conversions to doubles and bounded integers
// are done here:
//   uniform01()  = (next() >> 11) * 2^-53, in [0, 1)
//   below(n)     = rejection sampling on the top bits, in [0, n)
#pragma once

#include <bit>
#include <cstdint>
#include <random>

namespace ddd {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const int bits = 64 - std::countl_zero(n - 1);
    for (;;) {
      const std::uint64_t r = next() >> (64 - bits);
      if (r < n) return r;
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finaliser, used to hash coordinates into noise values.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ddd
