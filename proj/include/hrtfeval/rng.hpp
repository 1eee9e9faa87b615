#pragma once

// Portable seeded randomness. std:: distributions are implementation-defined,
// so everything that must be reproducible across platforms draws from
// SplitMix64 and converts bits to values here.

#include <cmath>
#include <cstdint>
#include <limits>

#include "hrtfeval/numeric.hpp"

namespace hrtfeval {

/// SplitMix64 (Steele, Lea, Flood 2014). Satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Independent stream for (seed, index): parallel workers that derive their
  /// generator from the iteration index reproduce the serial run exactly.
  static SplitMix64 stream(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 mixer(seed);
    const std::uint64_t base = mixer();
    SplitMix64 child(base ^ (index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    child();
    return child;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound), rejection-sampled to avoid modulo bias.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) return 0;
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t v = (*this)();
    while (v >= limit) v = (*this)();
    return v % bound;
  }

  /// Standard normal via Box-Muller (one value per call, the pair's sine half
  /// is discarded so the stream position stays simple to reason about).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace hrtfeval
