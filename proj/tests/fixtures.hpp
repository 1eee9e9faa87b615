#pragma once

// Shared helpers for the unit tests: small synthetic sets and random draws.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hrtfeval/core.hpp"
#include "hrtfeval/rng.hpp"

namespace fixtures {

using namespace hrtfeval;

inline Direction random_direction(SplitMix64& rng) {
  const double az = 360.0 * rng.uniform();
  const double el = rad_to_deg(std::asin(2.0 * rng.uniform() - 1.0));
  return Direction(az, el);
}

inline std::vector<Direction> horizontal_ring(double step_deg, double el = 0.0) {
  std::vector<Direction> out;
  for (double az = 0.0; az < 360.0 - 1e-9; az += step_deg) out.emplace_back(az, el);
  return out;
}

/// One unit pulse per ear at the given sample offsets.
inline StereoImpulse pulse_pair(std::size_t n, std::size_t left_at, std::size_t right_at, double gl = 1.0,
                                double gr = 1.0) {
  StereoImpulse imp{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  imp.left[left_at] = gl;
  imp.right[right_at] = gr;
  return imp;
}

/// Set of random (seeded) broadband impulses with decaying envelopes.
inline HrirSet noise_set(const std::vector<Direction>& dirs, std::size_t n, std::uint64_t seed,
                         std::uint32_t fs = 48000) {
  HrirSet set;
  set.sample_rate_hz = fs;
  set.directions = dirs;
  set.label = "noise";
  set.subject_id = "S" + std::to_string(seed);
  SplitMix64 rng(seed);
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    StereoImpulse imp{std::vector<double>(n), std::vector<double>(n)};
    for (Ear e : kEars) {
      auto& x = imp.ear(e);
      for (std::size_t i = 0; i < n; ++i) x[i] = rng.normal() * std::exp(-static_cast<double>(i) / 40.0);
    }
    set.impulses.push_back(std::move(imp));
  }
  return set;
}

inline std::filesystem::path fresh_dir(const std::string& base, const std::string& name) {
  const auto dir = std::filesystem::path(base) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
