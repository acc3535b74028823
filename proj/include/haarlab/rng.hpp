#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace haarlab {

// Counter-based pseudo-random generator built on the SplitMix64 mixing
// function (Steele, Lea, Flood 2014).  The i-th output is a fixed hash of
// (seed, i), so streams are reproducible across platforms and can be split
// without coordination.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), counter_(0) {}

  static uint64_t mix(uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Sub-stream derivation: sample i of a master seed uses derive(master, i).
  static uint64_t derive(uint64_t master, uint64_t index) {
    return mix(master ^ mix(0x9E3779B97F4A7C15ULL * (index + 1)));
  }

  uint64_t next_u64() { return mix(seed_ + 0x9E3779B97F4A7C15ULL * (++counter_)); }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, bound) by rejection.
  uint64_t uniform_below(uint64_t bound) {
    uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  // Standard normal via Box-Muller; caches the second deviate.
  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

  Rng child(uint64_t index) const { return Rng(derive(seed_, index)); }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  uint64_t counter_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace haarlab
