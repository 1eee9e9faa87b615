#pragma once

// Synthetic HRIR sets from a rigid spherical head (Woodworth delay model) and
// controlled perturbations with exact bookkeeping of the implied cue changes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hrtfeval/core.hpp"
#include "hrtfeval/fft.hpp"
#include "hrtfeval/rng.hpp"

namespace hrtfeval::synth {

enum class GainLaw { Unity, CosineShadow };

struct GridSpec {
  double azimuth_step_deg = 15.0;
  std::vector<double> elevations_deg{-30.0, 0.0, 30.0, 60.0};
  bool include_poles = true;

  std::vector<Direction> directions() const {
    if (!(azimuth_step_deg > 0.0)) throw Error(ErrorCode::InvalidConfig, "azimuth step must be positive");
    std::vector<Direction> out;
    for (double el : elevations_deg) {
      if (std::fabs(el) >= 90.0) continue;
      for (double az = 0.0; az < 360.0 - 1e-9; az += azimuth_step_deg) out.emplace_back(az, el);
    }
    if (include_poles) {
      out.emplace_back(0.0, 90.0);
      out.emplace_back(0.0, -90.0);
    }
    return out;
  }
};

struct SphereModelConfig {
  double head_radius_m = 0.0875;
  double speed_of_sound_m_s = 343.0;
  std::uint32_t sample_rate_hz = 48000;
  std::size_t impulse_length = 256;
  std::size_t base_delay_samples = 64;
  GridSpec grid{};
  GainLaw gain_law = GainLaw::Unity;
  /// Depth of the contralateral attenuation for the cosine-shadow law.
  double shadow_depth = 0.5;
  /// Optional low-level noise floor (relative to the unit pulse).
  std::optional<std::uint64_t> noise_seed;
  double noise_level = 1e-3;
  std::string subject_id = "synthetic";
  std::string label = "sphere";

  void validate() const {
    if (!(head_radius_m > 0.0) || !(speed_of_sound_m_s > 0.0) || sample_rate_hz == 0 || impulse_length == 0) {
      throw Error(ErrorCode::InvalidConfig, "radius, speed of sound, sample rate and length must be positive");
    }
    if (!(shadow_depth >= 0.0 && shadow_depth < 1.0)) throw Error(ErrorCode::InvalidConfig, "shadow_depth must lie in [0, 1)");
    if (!(noise_level >= 0.0 && noise_level < 0.2)) throw Error(ErrorCode::InvalidConfig, "noise_level must lie in [0, 0.2)");
  }
};

/// Woodworth ITD (a/c)(sin θ + θ) in microseconds, θ the lateral angle;
/// positive for sources on the left.
inline double woodworth_itd_us(double head_radius_m, double speed_of_sound_m_s, const Direction& d) {
  const double lateral = deg_to_rad(to_lateral_polar(d).lateral_deg);
  const double theta = std::fabs(lateral);
  const double itd = head_radius_m / speed_of_sound_m_s * (std::sin(theta) + theta) * 1e6;
  return std::copysign(itd, lateral);
}

inline double woodworth_itd_us(const SphereModelConfig& cfg, const Direction& d) {
  return woodworth_itd_us(cfg.head_radius_m, cfg.speed_of_sound_m_s, d);
}

struct EarDelays {
  long left;
  long right;
};

/// Integer ITD split around the base delay; floor division keeps the split
/// exactly mirror-symmetric between left and right sources.
inline EarDelays ear_delays(const SphereModelConfig& cfg, const Direction& d) {
  const long itd_samples = std::lround(woodworth_itd_us(cfg, d) * 1e-6 * static_cast<double>(cfg.sample_rate_hz));
  const auto half = static_cast<long>(std::floor(static_cast<double>(itd_samples) / 2.0));
  const long left = static_cast<long>(cfg.base_delay_samples) - half;
  return {left, left + itd_samples};
}

inline std::pair<double, double> ear_gains(const SphereModelConfig& cfg, const Direction& d) {
  if (cfg.gain_law == GainLaw::Unity) return {1.0, 1.0};
  const double s = std::sin(deg_to_rad(to_lateral_polar(d).lateral_deg));
  // 1 at the ipsilateral axis, 1 - depth at the contralateral axis
  return {1.0 - cfg.shadow_depth * (1.0 - s) / 2.0, 1.0 - cfg.shadow_depth * (1.0 + s) / 2.0};
}

inline HrirSet generate_sphere_set(const SphereModelConfig& cfg) {
  cfg.validate();
  HrirSet set;
  set.sample_rate_hz = cfg.sample_rate_hz;
  set.subject_id = cfg.subject_id;
  set.label = cfg.label;
  set.directions = cfg.grid.directions();
  if (set.directions.empty()) throw Error(ErrorCode::InvalidConfig, "direction grid is empty");
  std::optional<SplitMix64> rng;
  if (cfg.noise_seed) rng.emplace(*cfg.noise_seed);
  for (const auto& d : set.directions) {
    const auto delays = ear_delays(cfg, d);
    const auto n = static_cast<long>(cfg.impulse_length);
    if (delays.left < 0 || delays.right < 0 || delays.left >= n || delays.right >= n) {
      throw Error(ErrorCode::DelayExceedsLength, "ear delays (" + std::to_string(delays.left) + ", " +
                                                     std::to_string(delays.right) + ") do not fit in " +
                                                     std::to_string(n) + " samples");
    }
    const auto [gl, gr] = ear_gains(cfg, d);
    StereoImpulse imp{std::vector<double>(cfg.impulse_length, 0.0), std::vector<double>(cfg.impulse_length, 0.0)};
    if (rng) {
      for (Ear e : kEars) {
        for (auto& v : imp.ear(e)) v = cfg.noise_level * (2.0 * rng->uniform() - 1.0);
      }
    }
    imp.left[static_cast<std::size_t>(delays.left)] = gl;
    imp.right[static_cast<std::size_t>(delays.right)] = gr;
    set.impulses.push_back(std::move(imp));
  }
  set.validate();
  return set;
}

// ---------------------------------------------------------------------------
// Perturbations

enum class EarSelect { Left, Right, Both };

struct Perturbation {
  EarSelect ear = EarSelect::Both;
  /// Broadband gain applied to every selected impulse.
  double gain_db = 0.0;
  /// SD of an additional per-direction, per-ear Gaussian gain (dB).
  double gain_jitter_db = 0.0;
  /// Gain applied only to bins inside the band (both spectrum halves).
  std::optional<std::pair<double, double>> band_hz;
  double band_gain_db = 0.0;
  /// Whole-sample delay (zero filled, tail dropped).
  int delay_samples = 0;
  /// Restrict to these direction indices; empty means all.
  std::vector<std::size_t> directions;
};

struct PerturbationRecord {
  double gain_left_db = 0.0;
  double gain_right_db = 0.0;
  int delay_left = 0;
  int delay_right = 0;
  /// Implied changes, valid while the energies are well above epsilon and
  /// delays do not push energy out of the window.
  double ild_delta_db() const { return gain_right_db - gain_left_db; }
  double itd_delta_samples() const { return static_cast<double>(delay_right - delay_left); }
};

struct PerturbedSet {
  HrirSet set;
  std::vector<PerturbationRecord> records;  ///< per direction
  /// Bins whose magnitude the band gain touched (empty without a band).
  std::vector<std::size_t> band_bins;
};

namespace detail {

inline std::vector<std::size_t> bins_in_band(std::size_t n, double fs, std::pair<double, double> band) {
  std::vector<std::size_t> bins;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double f = fft::bin_frequency_hz(k, n, fs);
    if (f >= band.first && f <= band.second) bins.push_back(k);
  }
  return bins;
}

inline void apply_band_gain(std::vector<double>& x, std::span<const std::size_t> bins, double gain) {
  auto spec = fft::forward_real(x);
  const std::size_t n = x.size();
  for (std::size_t k : bins) {
    spec[k] *= gain;
    if (k != 0 && 2 * k != n) spec[n - k] *= gain;
  }
  fft::transform(spec, true);
  for (std::size_t i = 0; i < n; ++i) x[i] = spec[i].real();
}

inline void apply_delay(std::vector<double>& x, int delay) {
  if (delay == 0) return;
  std::vector<double> y(x.size(), 0.0);
  const auto n = static_cast<long>(x.size());
  for (long i = 0; i < n; ++i) {
    const long j = i + delay;
    if (j >= 0 && j < n) y[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(i)];
  }
  x = std::move(y);
}

}  // namespace detail

inline PerturbedSet perturb_set(const HrirSet& set, std::span<const Perturbation> spec, std::uint64_t seed) {
  PerturbedSet out{set, std::vector<PerturbationRecord>(set.size()), {}};
  SplitMix64 rng(seed);
  const std::size_t n = set.length();
  for (const auto& p : spec) {
    if (std::fabs(p.gain_db) > 60.0 || std::fabs(p.band_gain_db) > 60.0 || p.gain_jitter_db < 0.0 ||
        p.gain_jitter_db > 20.0) {
      throw Error(ErrorCode::SpecOutOfRange, "gains must lie within +-60 dB and jitter within [0, 20] dB");
    }
    if (static_cast<std::size_t>(std::abs(p.delay_samples)) >= n) {
      throw Error(ErrorCode::SpecOutOfRange, "delay of " + std::to_string(p.delay_samples) + " samples exceeds length");
    }
    if (p.band_hz && !(p.band_hz->first >= 0.0 && p.band_hz->first <= p.band_hz->second &&
                       p.band_hz->second <= set.sample_rate_hz / 2.0)) {
      throw Error(ErrorCode::SpecOutOfRange, "band must satisfy 0 <= lo <= hi <= Nyquist");
    }
    for (std::size_t idx : p.directions) {
      if (idx >= set.size()) throw Error(ErrorCode::SpecOutOfRange, "direction index " + std::to_string(idx) + " out of range");
    }
    std::vector<std::size_t> band;
    if (p.band_hz) {
      band = detail::bins_in_band(n, set.sample_rate_hz, *p.band_hz);
      out.band_bins.insert(out.band_bins.end(), band.begin(), band.end());
    }
    std::vector<bool> selected(set.size(), p.directions.empty());
    for (std::size_t idx : p.directions) selected[idx] = true;
    for (std::size_t d = 0; d < set.size(); ++d) {
      for (Ear e : kEars) {
        const bool applies = p.ear == EarSelect::Both || (p.ear == EarSelect::Left) == (e == Ear::Left);
        // jitter draws happen for every (direction, ear) so streams do not
        // depend on the selection
        const double jitter = p.gain_jitter_db > 0.0 ? p.gain_jitter_db * rng.normal() : 0.0;
        if (!applies || !selected[d]) continue;
        auto& x = out.set.impulses[d].ear(e);
        auto& rec = out.records[d];
        const double g_db = p.gain_db + jitter;
        if (g_db != 0.0) {
          const double g = std::pow(10.0, g_db / 20.0);
          for (auto& v : x) v *= g;
        }
        if (!band.empty() && p.band_gain_db != 0.0) {
          detail::apply_band_gain(x, band, std::pow(10.0, p.band_gain_db / 20.0));
        }
        detail::apply_delay(x, p.delay_samples);
        (e == Ear::Left ? rec.gain_left_db : rec.gain_right_db) += g_db;
        (e == Ear::Left ? rec.delay_left : rec.delay_right) += p.delay_samples;
      }
    }
  }
  std::sort(out.band_bins.begin(), out.band_bins.end());
  out.band_bins.erase(std::unique(out.band_bins.begin(), out.band_bins.end()), out.band_bins.end());
  return out;
}

}  // namespace hrtfeval::synth
