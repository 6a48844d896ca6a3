#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace vidsal {

/// SplitMix64 generator. Fixed algorithm and fixed mapping to doubles so that
/// seeded runs produce identical streams on every platform; std::<random>
/// distributions are implementation-defined and would break that.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform draw in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Inclusive integer range.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
    return lo + next() % (hi - lo + 1);
  }

  /// Standard normal via Box-Muller (cosine branch).
  double gauss() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives a child seed from a parent seed and a salt; used to key
/// per-(video, event) streams without sharing state across workers.
inline std::uint64_t mix_seed(std::uint64_t parent, std::uint64_t salt) {
  SplitMix64 g(parent ^ (salt + 0x9e3779b97f4a7c15ULL + (parent << 6) + (parent >> 2)));
  return g.next();
}

}  // namespace vidsal
