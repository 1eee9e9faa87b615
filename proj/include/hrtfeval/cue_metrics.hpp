#pragma once

// Numerical localisation-cue metrics: threshold-onset ITD, broadband ILD,
// log-spectral distortion, frequency-resolved LSD and spatial grid maps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hrtfeval/core.hpp"
#include "hrtfeval/fft.hpp"
#include "hrtfeval/numeric.hpp"
#include "hrtfeval/preprocess.hpp"
#include "hrtfeval/stats.hpp"

namespace hrtfeval {

// ---------------------------------------------------------------------------
// Per-direction cues

/// Interaural time difference in microseconds, positive when the left ear leads.
inline double estimate_itd(const HrirSet& set, std::size_t d, const MetricConfig& cfg) {
  const double onset_l = detect_onset(set.ear(d, Ear::Left), cfg);
  const double onset_r = detect_onset(set.ear(d, Ear::Right), cfg);
  return (onset_r - onset_l) / static_cast<double>(set.sample_rate_hz) * 1e6;
}

/// ITD of the set before remove_itd: the onset shifts recorded in a no-ITD
/// set are integers, so adding them back recovers the original onsets
/// exactly. Equals estimate_itd for sets that still carry their ITD.
inline double source_itd_us(const HrirSet& set, std::size_t d, const MetricConfig& cfg) {
  double itd = estimate_itd(set, d, cfg);
  if (set.itd_shifts) {
    const auto& k = (*set.itd_shifts)[d];
    itd += static_cast<double>(k.left - k.right) / static_cast<double>(set.sample_rate_hz) * 1e6;
  }
  return itd;
}

inline double mean_energy(std::span<const double> x) {
  StableSum acc;
  for (double v : x) acc.add(v * v);
  return acc.value() / static_cast<double>(x.size());
}

/// 10 log10((E_R + eps) / (E_L + eps)) with E the mean squared sample.
inline double ild_db(std::span<const double> left, std::span<const double> right, double epsilon) {
  return 10.0 * std::log10((mean_energy(right) + epsilon) / (mean_energy(left) + epsilon));
}

inline double ild_db(const HrirSet& set, std::size_t d, const MetricConfig& cfg) {
  return ild_db(set.ear(d, Ear::Left), set.ear(d, Ear::Right), cfg.epsilon);
}

/// 20 log10(|X[k]| + eps) for bins 0 .. Nyquist.
inline std::vector<double> log_magnitude_db(std::span<const double> x, double epsilon) {
  auto mag = fft::magnitude_spectrum(x);
  for (auto& v : mag) v = 20.0 * std::log10(v + epsilon);
  return mag;
}

/// Inclusive bin range covered by the configured band (all bins if unset).
inline std::pair<std::size_t, std::size_t> band_bins(std::size_t length, double sample_rate_hz,
                                                     const std::optional<std::pair<double, double>>& band) {
  const std::size_t last_bin = length / 2;
  if (!band) return {0, last_bin};
  std::optional<std::size_t> first, last;
  for (std::size_t k = 0; k <= last_bin; ++k) {
    const double f = fft::bin_frequency_hz(k, length, sample_rate_hz);
    if (f >= band->first && f <= band->second) {
      if (!first) first = k;
      last = k;
    }
  }
  if (!first) {
    throw Error(ErrorCode::EmptyBand, "no frequency bin inside [" + std::to_string(band->first) + ", " +
                                          std::to_string(band->second) + "] Hz");
  }
  return {*first, *last};
}

inline double lsd_from_log_spectra(std::span<const double> cand_db, std::span<const double> ref_db,
                                   std::pair<std::size_t, std::size_t> bins) {
  StableSum acc;
  for (std::size_t k = bins.first; k <= bins.second; ++k) {
    const double d = cand_db[k] - ref_db[k];
    acc.add(d * d);
  }
  return std::sqrt(acc.value() / static_cast<double>(bins.second - bins.first + 1));
}

inline double signed_mean_from_log_spectra(std::span<const double> cand_db, std::span<const double> ref_db,
                                           std::pair<std::size_t, std::size_t> bins) {
  StableSum acc;
  for (std::size_t k = bins.first; k <= bins.second; ++k) acc.add(cand_db[k] - ref_db[k]);
  return acc.value() / static_cast<double>(bins.second - bins.first + 1);
}

/// RMS over frequency of the log-magnitude difference for one ear of a
/// matched direction pair.
inline double lsd_db(const HrirSet& cand, const HrirSet& ref, const DirectionPair& pair, Ear ear,
                     const MetricConfig& cfg) {
  const auto& x = cand.ear(pair.cand_index, ear);
  const auto& y = ref.ear(pair.ref_index, ear);
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, "impulse lengths " + std::to_string(x.size()) + " and " +
                                               std::to_string(y.size()) + " differ");
  }
  if (cand.sample_rate_hz != ref.sample_rate_hz) throw Error(ErrorCode::SampleRateMismatch, "LSD across sample rates");
  const auto bins = band_bins(x.size(), ref.sample_rate_hz, cfg.freq_band_hz);
  return lsd_from_log_spectra(log_magnitude_db(x, cfg.epsilon), log_magnitude_db(y, cfg.epsilon), bins);
}

// ---------------------------------------------------------------------------
// Set comparison

struct CueRecord {
  Direction direction;
  std::size_t ref_index = 0;
  std::size_t cand_index = 0;
  double itd_cand_us = 0.0;
  double itd_ref_us = 0.0;
  double itd_abs_err_us = 0.0;
  double ild_cand_db = 0.0;
  double ild_ref_db = 0.0;
  double ild_abs_err_db = 0.0;
  double ild_signed_db = 0.0;  ///< candidate minus reference
  double lsd_left_db = 0.0;
  double lsd_right_db = 0.0;
  double lsd_signed_mean_db = 0.0;  ///< mean over ears and bins of candidate minus reference

  double itd_signed_us() const { return itd_cand_us - itd_ref_us; }
  double lsd_mean_db() const { return 0.5 * (lsd_left_db + lsd_right_db); }
};

struct CueReport {
  std::string subject_id;
  std::string condition;
  std::vector<CueRecord> records;  ///< reference direction order
  double mean_abs_itd_us = 0.0;
  double mean_abs_ild_db = 0.0;
  double mean_lsd_db = 0.0;  ///< 1/(2D) sum over directions and ears
};

inline void check_comparable(const HrirSet& cand, const HrirSet& ref) {
  if (cand.sample_rate_hz != ref.sample_rate_hz) {
    throw Error(ErrorCode::SampleRateMismatch, "candidate '" + cand.label + "' and reference '" + ref.label +
                                                   "' have different sample rates");
  }
  if (cand.length() != ref.length()) {
    throw Error(ErrorCode::LengthMismatch, "candidate '" + cand.label + "' has length " + std::to_string(cand.length()) +
                                               ", reference " + std::to_string(ref.length()));
  }
}

inline CueReport compare_sets(const HrirSet& cand, const HrirSet& ref, const MetricConfig& cfg,
                              double tol_deg = kDefaultMatchToleranceDeg) {
  cfg.validate();
  check_comparable(cand, ref);
  const auto pairs = match_directions(cand, ref, tol_deg);
  const auto bins = band_bins(ref.length(), ref.sample_rate_hz, cfg.freq_band_hz);
  CueReport rep;
  rep.subject_id = cand.subject_id;
  rep.condition = cand.label;
  rep.records.reserve(pairs.size());
  StableSum itd_acc, ild_acc, lsd_acc;
  for (const auto& p : pairs) {
    CueRecord r;
    r.direction = ref.directions[p.ref_index];
    r.ref_index = p.ref_index;
    r.cand_index = p.cand_index;
    r.itd_cand_us = source_itd_us(cand, p.cand_index, cfg);
    r.itd_ref_us = source_itd_us(ref, p.ref_index, cfg);
    r.itd_abs_err_us = std::fabs(r.itd_cand_us - r.itd_ref_us);
    r.ild_cand_db = ild_db(cand, p.cand_index, cfg);
    r.ild_ref_db = ild_db(ref, p.ref_index, cfg);
    r.ild_signed_db = r.ild_cand_db - r.ild_ref_db;
    r.ild_abs_err_db = std::fabs(r.ild_signed_db);
    double signed_sum = 0.0;
    for (Ear e : kEars) {
      const auto c_db = log_magnitude_db(cand.ear(p.cand_index, e), cfg.epsilon);
      const auto r_db = log_magnitude_db(ref.ear(p.ref_index, e), cfg.epsilon);
      const double lsd = lsd_from_log_spectra(c_db, r_db, bins);
      (e == Ear::Left ? r.lsd_left_db : r.lsd_right_db) = lsd;
      signed_sum += signed_mean_from_log_spectra(c_db, r_db, bins);
      lsd_acc.add(lsd);
    }
    r.lsd_signed_mean_db = 0.5 * signed_sum;
    itd_acc.add(r.itd_abs_err_us);
    ild_acc.add(r.ild_abs_err_db);
    rep.records.push_back(r);
  }
  const double d = static_cast<double>(rep.records.size());
  rep.mean_abs_itd_us = itd_acc.value() / d;
  rep.mean_abs_ild_db = ild_acc.value() / d;
  rep.mean_lsd_db = lsd_acc.value() / (2.0 * d);
  return rep;
}

// ---------------------------------------------------------------------------
// Frequency-resolved LSD

struct FrequencyLsdCurve {
  std::vector<double> freq_bins_hz;
  std::vector<double> mean_db;  ///< across subjects
  std::vector<double> sd_db;    ///< sample SD across subjects (0 for one subject)
  std::size_t n_subjects = 0;
  stats::Matrix subject_curves;  ///< subjects x bins
};

/// Per subject and bin: RMS over ears and matched directions of the
/// log-magnitude difference; then mean and SD across subjects.
inline FrequencyLsdCurve lsd_frequency_curve(std::span<const HrirSet> cands, std::span<const HrirSet> refs,
                                             const MetricConfig& cfg, double tol_deg = kDefaultMatchToleranceDeg) {
  cfg.validate();
  if (cands.size() != refs.size() || cands.empty()) {
    throw Error(ErrorCode::HeterogeneousGrids, "need one candidate per reference and at least one subject");
  }
  const std::uint32_t fs = refs[0].sample_rate_hz;
  const std::size_t n = refs[0].length();
  for (std::size_t s = 0; s < refs.size(); ++s) {
    if (refs[s].sample_rate_hz != fs || cands[s].sample_rate_hz != fs || refs[s].length() != n ||
        cands[s].length() != n) {
      throw Error(ErrorCode::HeterogeneousGrids, "subject " + std::to_string(s) + " differs in sample rate or length");
    }
  }
  const auto bins = band_bins(n, fs, cfg.freq_band_hz);
  const std::size_t nb = bins.second - bins.first + 1;
  FrequencyLsdCurve curve;
  curve.n_subjects = refs.size();
  curve.subject_curves = stats::Matrix(refs.size(), nb);
  for (std::size_t k = 0; k < nb; ++k) curve.freq_bins_hz.push_back(fft::bin_frequency_hz(bins.first + k, n, fs));
  for (std::size_t s = 0; s < refs.size(); ++s) {
    const auto pairs = match_directions(cands[s], refs[s], tol_deg);
    std::vector<StableSum> acc(nb);
    for (const auto& p : pairs) {
      for (Ear e : kEars) {
        const auto c_db = log_magnitude_db(cands[s].ear(p.cand_index, e), cfg.epsilon);
        const auto r_db = log_magnitude_db(refs[s].ear(p.ref_index, e), cfg.epsilon);
        for (std::size_t k = 0; k < nb; ++k) {
          const double d = c_db[bins.first + k] - r_db[bins.first + k];
          acc[k].add(d * d);
        }
      }
    }
    const double count = 2.0 * static_cast<double>(pairs.size());
    for (std::size_t k = 0; k < nb; ++k) curve.subject_curves(s, k) = std::sqrt(acc[k].value() / count);
  }
  curve.mean_db.resize(nb);
  curve.sd_db.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const auto col = curve.subject_curves.column(k);
    curve.mean_db[k] = mean(col);
    curve.sd_db[k] = sample_sd(col);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Spatial grid maps

enum class CueMetric { Itd, Ild, Lsd, LsdSigned };

inline std::string to_string(CueMetric m) {
  switch (m) {
    case CueMetric::Itd: return "itd";
    case CueMetric::Ild: return "ild";
    case CueMetric::Lsd: return "lsd";
    case CueMetric::LsdSigned: return "lsd_signed";
  }
  return "unknown";
}

/// Signed per-direction value mapped by spatial_grid_differences.
inline double cue_value(const CueRecord& r, CueMetric m) {
  switch (m) {
    case CueMetric::Itd: return r.itd_signed_us();
    case CueMetric::Ild: return r.ild_signed_db;
    case CueMetric::Lsd: return r.lsd_mean_db();
    case CueMetric::LsdSigned: return r.lsd_signed_mean_db;
  }
  return 0.0;
}

enum class NodeStatus { Tested, InsufficientSubjects, Empty };

struct GridNode {
  Direction position;
  NodeStatus status = NodeStatus::Empty;
  std::size_t n_subjects = 0;
  double mean_difference = 0.0;
  double t = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  int tier = 0;  ///< 3: p < 0.001, 2: p < 0.01, 1: p < 0.05, 0: not significant
  bool significant = false;
};

struct SpatialGridSummary {
  CueMetric metric = CueMetric::Itd;
  double grid_step_deg = 45.0;
  double alpha = 0.05;
  std::vector<GridNode> nodes;  ///< ordered by azimuth, then elevation
};

/// Grid nodes at multiples of `step_deg` in azimuth [0, 360) and elevation
/// [-90, 90]; each pole is a single node.
inline std::vector<Direction> grid_nodes(double step_deg) {
  if (!(step_deg > 0.0) || step_deg > 90.0) throw Error(ErrorCode::InvalidConfig, "grid step must lie in (0, 90]");
  std::vector<double> elevations;
  for (double el = -90.0; el <= 90.0 + 1e-9; el += step_deg) elevations.push_back(std::min(el, 90.0));
  std::vector<Direction> nodes;
  for (double az = 0.0; az < 360.0 - 1e-9; az += step_deg) {
    for (double el : elevations) {
      if (std::fabs(el) == 90.0 && az != 0.0) continue;
      nodes.emplace_back(az, el);
    }
  }
  std::stable_sort(nodes.begin(), nodes.end(), [](const Direction& a, const Direction& b) {
    if (a.azimuth_deg() != b.azimuth_deg()) return a.azimuth_deg() < b.azimuth_deg();
    return a.elevation_deg() < b.elevation_deg();
  });
  return nodes;
}

/// Nearest node by great-circle distance; ties (within 1e-9 deg) go to the
/// node that comes first in azimuth-then-elevation order.
inline std::size_t nearest_node(std::span<const Direction> nodes, const Direction& d) {
  std::vector<double> dist(nodes.size());
  double best = 360.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    dist[i] = great_circle_deg(nodes[i], d);
    best = std::min(best, dist[i]);
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (dist[i] <= best + 1e-9) return i;
  }
  return 0;
}

inline int significance_tier(double p) {
  if (p < 0.001) return 3;
  if (p < 0.01) return 2;
  if (p < 0.05) return 1;
  return 0;
}

/// Per grid node: each subject contributes the mean signed value of its
/// directions binned to the node; a two-sided one-sample t-test against zero
/// runs across subjects and the p values are Benjamini-Hochberg adjusted over
/// tested nodes. Nodes with fewer than two contributing subjects are
/// reported as InsufficientSubjects and left out of the correction.
inline SpatialGridSummary spatial_grid_differences(std::span<const CueReport> reports, CueMetric metric,
                                                   double grid_step_deg = 45.0, double alpha = 0.05) {
  if (reports.size() < 3) {
    throw Error(ErrorCode::InsufficientSubjects, "spatial grid test needs >= 3 subjects, got " + std::to_string(reports.size()));
  }
  const auto nodes = grid_nodes(grid_step_deg);
  // values[node][subject contribution]
  std::vector<std::vector<double>> values(nodes.size());
  for (const auto& rep : reports) {
    std::vector<StableSum> sums(nodes.size());
    std::vector<std::size_t> counts(nodes.size(), 0);
    for (const auto& rec : rep.records) {
      const std::size_t i = nearest_node(nodes, rec.direction);
      sums[i].add(cue_value(rec, metric));
      ++counts[i];
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (counts[i] > 0) values[i].push_back(sums[i].value() / static_cast<double>(counts[i]));
    }
  }
  SpatialGridSummary out;
  out.metric = metric;
  out.grid_step_deg = grid_step_deg;
  out.alpha = alpha;
  std::vector<double> raw;
  std::vector<std::size_t> tested;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    GridNode g;
    g.position = nodes[i];
    g.n_subjects = values[i].size();
    if (values[i].empty()) {
      g.status = NodeStatus::Empty;
    } else if (values[i].size() < 2) {
      g.status = NodeStatus::InsufficientSubjects;
      g.mean_difference = values[i][0];
    } else {
      g.status = NodeStatus::Tested;
      g.mean_difference = mean(values[i]);
      const double sd = sample_sd(values[i]);
      if (sd > 0.0) {
        const auto r = stats::t_test_one_sample(values[i], 0.0);
        g.t = r.statistic;
        g.p_raw = r.p;
      } else if (g.mean_difference == 0.0) {
        g.t = 0.0;
        g.p_raw = 1.0;
      } else {
        // identical non-zero values in every subject
        g.t = g.mean_difference > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        g.p_raw = 0.0;
      }
      raw.push_back(g.p_raw);
      tested.push_back(out.nodes.size());
    }
    out.nodes.push_back(g);
  }
  const auto adj = stats::bh_fdr_adjust(raw);
  for (std::size_t j = 0; j < tested.size(); ++j) {
    auto& g = out.nodes[tested[j]];
    g.p_adjusted = adj[j];
    g.tier = significance_tier(g.p_adjusted);
    g.significant = g.p_adjusted < alpha;
  }
  return out;
}

}  // namespace hrtfeval
