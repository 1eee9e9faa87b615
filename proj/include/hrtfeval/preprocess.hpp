#pragma once

// HRIR post-processing: spatial alignment, temporal windowing, broadband
// level normalisation at the frontal direction and onset-based ITD removal.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hrtfeval/core.hpp"
#include "hrtfeval/numeric.hpp"

namespace hrtfeval {

struct PreprocessConfig {
  std::size_t fade_in_samples = 16;
  std::size_t fade_out_samples = 128;
  /// 0 means "use the reference set's impulse length".
  std::size_t target_length = 0;
  Direction frontal_direction{0.0, 0.0};
  double itd_padding_ms = 0.8;
  double match_tolerance_deg = kDefaultMatchToleranceDeg;
  MetricConfig onset{};

  void validate(std::size_t resolved_length) const {
    onset.validate();
    if (fade_in_samples + fade_out_samples > resolved_length) {
      throw Error(ErrorCode::InvalidConfig, "fade-in + fade-out exceed the target length");
    }
    if (!(itd_padding_ms >= 0.0)) throw Error(ErrorCode::InvalidConfig, "itd_padding_ms must be >= 0");
  }
};

/// sin^2 ramp over [0, fade_in), cos^2 ramp over the last fade_out samples,
/// unity in between.
inline std::vector<double> window_weights(std::size_t length, std::size_t fade_in, std::size_t fade_out) {
  std::vector<double> w(length, 1.0);
  for (std::size_t n = 0; n < fade_in && n < length; ++n) {
    const double s = std::sin(kPi * static_cast<double>(n) / (2.0 * static_cast<double>(fade_in)));
    w[n] = s * s;
  }
  const std::size_t start = length - fade_out;
  for (std::size_t k = 0; k < fade_out; ++k) {
    const double c = std::cos(kPi * static_cast<double>(k) / (2.0 * static_cast<double>(fade_out)));
    w[start + k] *= c * c;
  }
  return w;
}

inline HrirSet window_hrirs(const HrirSet& set, const PreprocessConfig& cfg) {
  const std::size_t target = cfg.target_length == 0 ? set.length() : cfg.target_length;
  cfg.validate(target);
  if (set.length() < target) {
    throw Error(ErrorCode::LengthTooShort, "impulse length " + std::to_string(set.length()) +
                                               " shorter than target " + std::to_string(target));
  }
  const auto w = window_weights(target, cfg.fade_in_samples, cfg.fade_out_samples);
  HrirSet out = set;
  for (auto& imp : out.impulses) {
    for (Ear e : kEars) {
      auto& x = imp.ear(e);
      x.resize(target);
      for (std::size_t n = 0; n < target; ++n) x[n] *= w[n];
    }
  }
  return out;
}

inline double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  StableSum acc;
  for (double v : x) acc.add(v * v);
  return std::sqrt(acc.value() / static_cast<double>(x.size()));
}

/// Mean of the left and right RMS at the frontal direction.
inline double frontal_mean_rms(const HrirSet& set, const Direction& frontal,
                               double tol_deg = kDefaultMatchToleranceDeg) {
  const auto idx = find_direction(set.directions, frontal, tol_deg);
  if (!idx) {
    throw Error(ErrorCode::FrontalDirectionMissing,
                "no direction within " + std::to_string(tol_deg) + " deg of the frontal direction in '" +
                    set.label + "'");
  }
  return 0.5 * (rms(set.ear(*idx, Ear::Left)) + rms(set.ear(*idx, Ear::Right)));
}

/// Scales every impulse by one factor so that the frontal mean RMS equals
/// `reference_rms`. Returns the scaled set and the factor.
inline std::pair<HrirSet, double> normalise_level(const HrirSet& set, const PreprocessConfig& cfg,
                                                  double reference_rms) {
  if (!(reference_rms > 0.0) || !std::isfinite(reference_rms)) {
    throw Error(ErrorCode::InvalidConfig, "reference RMS must be positive and finite");
  }
  const double current = frontal_mean_rms(set, cfg.frontal_direction, cfg.match_tolerance_deg);
  if (!(current > 0.0)) throw Error(ErrorCode::ZeroFrontalEnergy, "frontal impulses are all zero");
  const double scale = reference_rms / current;
  HrirSet out = set;
  if (scale != 1.0) {
    for (auto& imp : out.impulses) {
      for (Ear e : kEars) {
        for (auto& v : imp.ear(e)) v *= scale;
      }
    }
  }
  return {std::move(out), scale};
}

/// Onset as the first position where |x| reaches `threshold_fraction` of the
/// peak magnitude. With upsample_factor U > 1 the magnitude is linearly
/// interpolated on a 1/U grid, so the result is a multiple of 1/U.
inline double detect_onset(std::span<const double> impulse, double threshold_fraction, unsigned upsample_factor) {
  double peak = 0.0;
  for (double v : impulse) peak = std::max(peak, std::fabs(v));
  if (!(peak > 0.0)) throw Error(ErrorCode::SilentImpulse, "impulse is all zero");
  const double threshold = threshold_fraction * peak;
  std::size_t first = 0;
  while (std::fabs(impulse[first]) < threshold) ++first;
  if (upsample_factor <= 1 || first == 0) return static_cast<double>(first);
  const double a = std::fabs(impulse[first - 1]);
  const double b = std::fabs(impulse[first]);
  const double u = static_cast<double>(upsample_factor);
  for (unsigned j = 1; j < upsample_factor; ++j) {
    const double t = static_cast<double>(j) / u;
    if (a + (b - a) * t >= threshold) return static_cast<double>(first - 1) + t;
  }
  return static_cast<double>(first);
}

inline double detect_onset(std::span<const double> impulse, const MetricConfig& cfg) {
  return detect_onset(impulse, cfg.onset_threshold_fraction, cfg.upsample_factor);
}

inline int padding_samples(double itd_padding_ms, std::uint32_t sample_rate_hz) {
  return static_cast<int>(std::lround(itd_padding_ms * static_cast<double>(sample_rate_hz) / 1000.0));
}

/// Circular shift by k (positive = later), zeroing the samples that wrapped.
inline std::vector<double> shift_zero_wrapped(std::span<const double> x, int k) {
  const auto n = static_cast<long>(x.size());
  std::vector<double> y(x.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    const long j = i + k;
    if (j >= 0 && j < n) y[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(i)];
  }
  return y;
}

/// Moves each ear's onset to the fixed padding position. Shifts are integer
/// samples computed from the integer-sample onset; they are recorded per
/// direction (accumulated if the set already carries shifts).
inline HrirSet remove_itd(const HrirSet& set, const PreprocessConfig& cfg) {
  cfg.onset.validate();
  const int pad = padding_samples(cfg.itd_padding_ms, set.sample_rate_hz);
  HrirSet out = set;
  std::vector<ItdShift> shifts(set.size());
  for (std::size_t d = 0; d < set.size(); ++d) {
    for (Ear e : kEars) {
      const auto& x = set.ear(d, e);
      double onset = 0.0;
      try {
        onset = detect_onset(x, cfg.onset.onset_threshold_fraction, 1);
      } catch (const Error&) {
        throw Error(ErrorCode::SilentImpulse, "direction " + std::to_string(d) + ", " +
                                                  (e == Ear::Left ? "left" : "right") + " ear of '" +
                                                  set.label + "' is silent");
      }
      const int k = static_cast<int>(std::lround(static_cast<double>(pad) - onset));
      out.impulses[d].ear(e) = shift_zero_wrapped(x, k);
      (e == Ear::Left ? shifts[d].left : shifts[d].right) = k;
    }
  }
  if (set.itd_shifts) {
    for (std::size_t d = 0; d < set.size(); ++d) {
      shifts[d].left += (*set.itd_shifts)[d].left;
      shifts[d].right += (*set.itd_shifts)[d].right;
    }
  }
  out.itd_shifts = std::move(shifts);
  return out;
}

/// Reorders (and relabels) `set` onto the reference's direction list.
inline HrirSet align_to_reference(const HrirSet& set, const HrirSet& reference, double tol_deg) {
  const auto pairs = match_directions(set, reference, tol_deg);
  HrirSet out;
  out.sample_rate_hz = set.sample_rate_hz;
  out.label = set.label;
  out.subject_id = set.subject_id;
  out.directions = reference.directions;
  out.impulses.reserve(pairs.size());
  if (set.itd_shifts) out.itd_shifts.emplace();
  for (const auto& p : pairs) {
    out.impulses.push_back(set.impulses[p.cand_index]);
    if (set.itd_shifts) out.itd_shifts->push_back((*set.itd_shifts)[p.cand_index]);
  }
  return out;
}

/// alignment -> windowing -> level normalisation -> ITD removal. The
/// reference provides the direction grid, the target length (unless set in
/// cfg) and the frontal RMS level.
inline HrirSet preprocess_pipeline(const HrirSet& set, const HrirSet& reference, PreprocessConfig cfg) {
  if (set.sample_rate_hz != reference.sample_rate_hz) {
    throw Error(ErrorCode::SampleRateMismatch, "set '" + set.label + "' at " + std::to_string(set.sample_rate_hz) +
                                                   " Hz, reference at " +
                                                   std::to_string(reference.sample_rate_hz) + " Hz");
  }
  if (cfg.target_length == 0) cfg.target_length = reference.length();
  const double reference_rms = frontal_mean_rms(reference, cfg.frontal_direction, cfg.match_tolerance_deg);
  if (!(reference_rms > 0.0)) throw Error(ErrorCode::ZeroFrontalEnergy, "reference frontal impulses are all zero");
  HrirSet aligned = align_to_reference(set, reference, cfg.match_tolerance_deg);
  HrirSet windowed = window_hrirs(aligned, cfg);
  auto [normalised, scale] = normalise_level(windowed, cfg, reference_rms);
  (void)scale;
  return remove_itd(normalised, cfg);
}

}  // namespace hrtfeval
