#pragma once

// Behavioural localisation metrics: per-trial geometry, front-back / cone
// classification, lateral-polar quadrants, participant and group aggregation,
// condition tests and the LSD-versus-performance correlation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hrtfeval/core.hpp"
#include "hrtfeval/stats.hpp"
#include "hrtfeval/trial.hpp"

namespace hrtfeval::behaviour {

enum class ConfusionClass { Precision, FrontBack, InCone, OffCone };
enum class Quadrant { FrontDown, FrontUp, BackUp, BackDown };
enum class QuadrantRule { StrictMismatch, PolarErrorOver90 };

inline std::string to_string(ConfusionClass c) {
  switch (c) {
    case ConfusionClass::Precision: return "precision";
    case ConfusionClass::FrontBack: return "front_back";
    case ConfusionClass::InCone: return "in_cone";
    case ConfusionClass::OffCone: return "off_cone";
  }
  return "unknown";
}

inline std::string to_string(Quadrant q) {
  switch (q) {
    case Quadrant::FrontDown: return "front_down";
    case Quadrant::FrontUp: return "front_up";
    case Quadrant::BackUp: return "back_up";
    case Quadrant::BackDown: return "back_down";
  }
  return "unknown";
}

struct Options {
  double cone_deg = 45.0;
  QuadrantRule quadrant_rule = QuadrantRule::StrictMismatch;
};

/// First matching rule wins: within the cone around the target, within the
/// cone around the front-back mirrored target, same cone of confusion
/// (lateral difference within the cone), otherwise off-cone.
inline ConfusionClass classify_confusion(const Direction& target, const Direction& response, double cone_deg = 45.0) {
  if (great_circle_deg(target, response) <= cone_deg) return ConfusionClass::Precision;
  if (great_circle_deg(mirror_front_back(target), response) <= cone_deg) return ConfusionClass::FrontBack;
  const double dlat = to_lateral_polar(response).lateral_deg - to_lateral_polar(target).lateral_deg;
  if (std::fabs(dlat) <= cone_deg) return ConfusionClass::InCone;
  return ConfusionClass::OffCone;
}

/// Polar boundaries at -90, 0, 90, 180, 270; an angle on a boundary belongs
/// to the upper interval.
inline Quadrant quadrant_of(const LateralPolar& lp) {
  const double p = lp.polar_deg;
  if (p < 0.0) return Quadrant::FrontDown;
  if (p < 90.0) return Quadrant::FrontUp;
  if (p < 180.0) return Quadrant::BackUp;
  return Quadrant::BackDown;
}

struct TrialMetrics {
  std::string participant;
  std::string condition;
  long trial_index = 0;
  Direction target;
  Direction response;
  double great_circle_deg = 0.0;
  double lateral_target_deg = 0.0;
  double lateral_response_deg = 0.0;
  double lateral_error_deg = 0.0;  ///< response minus target
  double polar_target_deg = 0.0;
  double polar_response_deg = 0.0;
  double polar_error_deg = 0.0;  ///< response minus target, wrapped to (-180, 180]
  ConfusionClass confusion = ConfusionClass::Precision;
  Quadrant quadrant_target = Quadrant::FrontUp;
  Quadrant quadrant_response = Quadrant::FrontUp;
  bool is_quadrant_error = false;
  /// Target and its front-back mirror lie within one cone, so a front-back
  /// confusion cannot be told apart from a precise response.
  bool near_interaural_axis = false;
};

inline TrialMetrics trial_metrics(const Direction& target, const Direction& response, const Options& opt = {}) {
  TrialMetrics m;
  m.target = target;
  m.response = response;
  m.great_circle_deg = hrtfeval::great_circle_deg(target, response);
  const auto lt = to_lateral_polar(target);
  const auto lr = to_lateral_polar(response);
  m.lateral_target_deg = lt.lateral_deg;
  m.lateral_response_deg = lr.lateral_deg;
  m.lateral_error_deg = lr.lateral_deg - lt.lateral_deg;
  m.polar_target_deg = lt.polar_deg;
  m.polar_response_deg = lr.polar_deg;
  m.polar_error_deg = wrap_180(lr.polar_deg - lt.polar_deg);
  m.confusion = classify_confusion(target, response, opt.cone_deg);
  m.quadrant_target = quadrant_of(lt);
  m.quadrant_response = quadrant_of(lr);
  m.is_quadrant_error = opt.quadrant_rule == QuadrantRule::StrictMismatch ? m.quadrant_target != m.quadrant_response
                                                                          : std::fabs(m.polar_error_deg) > 90.0;
  m.near_interaural_axis = hrtfeval::great_circle_deg(target, mirror_front_back(target)) <= opt.cone_deg;
  return m;
}

inline TrialMetrics trial_metrics(const Trial& t, const Options& opt = {}) {
  TrialMetrics m = trial_metrics(t.target, t.response, opt);
  m.participant = t.participant;
  m.condition = t.condition;
  m.trial_index = t.trial_index;
  return m;
}

// ---------------------------------------------------------------------------
// Aggregation

enum class Metric {
  GreatCircle,
  LateralAccuracy,
  LateralPrecision,
  PolarAccuracy,
  PolarPrecision,
  FrontBackRate,
  QuadrantError,
};

inline constexpr std::array<Metric, 7> kMetrics{Metric::GreatCircle,   Metric::LateralAccuracy, Metric::LateralPrecision,
                                                Metric::PolarAccuracy, Metric::PolarPrecision,  Metric::FrontBackRate,
                                                Metric::QuadrantError};

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::GreatCircle: return "great_circle_deg";
    case Metric::LateralAccuracy: return "lateral_accuracy_deg";
    case Metric::LateralPrecision: return "lateral_precision_deg";
    case Metric::PolarAccuracy: return "polar_accuracy_deg";
    case Metric::PolarPrecision: return "polar_precision_deg";
    case Metric::FrontBackRate: return "front_back_rate_pct";
    case Metric::QuadrantError: return "quadrant_error_pct";
  }
  return "unknown";
}

struct ParticipantSummary {
  std::string participant;
  std::string condition;
  std::size_t n_trials = 0;
  std::size_t n_locations = 0;
  std::size_t n_near_axis = 0;
  double great_circle_deg = 0.0;
  double lateral_accuracy_deg = 0.0;
  double lateral_precision_deg = 0.0;
  double polar_accuracy_deg = 0.0;
  double polar_precision_deg = 0.0;
  double front_back_rate_pct = 0.0;
  double quadrant_error_pct = 0.0;
  /// Polar metrics restricted to trials without a quadrant error; NaN when
  /// no such trial exists.
  double polar_accuracy_local_deg = 0.0;
  double polar_precision_local_deg = 0.0;

  double value(Metric m) const {
    switch (m) {
      case Metric::GreatCircle: return great_circle_deg;
      case Metric::LateralAccuracy: return lateral_accuracy_deg;
      case Metric::LateralPrecision: return lateral_precision_deg;
      case Metric::PolarAccuracy: return polar_accuracy_deg;
      case Metric::PolarPrecision: return polar_precision_deg;
      case Metric::FrontBackRate: return front_back_rate_pct;
      case Metric::QuadrantError: return quadrant_error_pct;
    }
    return 0.0;
  }
};

namespace detail {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct LocationStats {
  double accuracy;   // median across locations of per-location median |error|
  double precision;  // median across locations of per-location SD of signed error
};

/// Per-location median of |error| and SD of the signed error, then medians
/// across locations. Locations with a single trial have no SD and are left
/// out of the precision median.
inline LocationStats location_stats(const std::vector<std::vector<double>>& signed_errors) {
  std::vector<double> acc, prec;
  for (const auto& errs : signed_errors) {
    if (errs.empty()) continue;
    std::vector<double> abs_errs(errs.size());
    for (std::size_t i = 0; i < errs.size(); ++i) abs_errs[i] = std::fabs(errs[i]);
    acc.push_back(stats::median(abs_errs));
    if (errs.size() >= 2) prec.push_back(sample_sd(errs));
  }
  return {acc.empty() ? kNaN : stats::median(acc), prec.empty() ? kNaN : stats::median(prec)};
}

}  // namespace detail

inline ParticipantSummary participant_summary(const ResponseLog& log, const std::string& participant,
                                              const std::string& condition, const Options& opt = {}) {
  std::vector<TrialMetrics> trials;
  for (const auto& t : log.trials) {
    if (t.participant == participant && t.condition == condition) trials.push_back(trial_metrics(t, opt));
  }
  if (trials.empty()) {
    throw Error(ErrorCode::NoTrials, "no trials for participant '" + participant + "', condition '" + condition + "'");
  }
  std::vector<Direction> locations;
  std::vector<std::size_t> loc_of(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    std::size_t j = 0;
    for (; j < locations.size(); ++j) {
      if (great_circle_deg(locations[j], trials[i].target) < HrirSet::kUniqueDirectionDeg) break;
    }
    if (j == locations.size()) locations.push_back(trials[i].target);
    loc_of[i] = j;
  }
  const std::size_t nl = locations.size();
  std::vector<std::vector<double>> gc(nl), lat(nl), pol(nl), pol_local(nl);
  std::size_t fb = 0, quad = 0, near_axis = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& m = trials[i];
    gc[loc_of[i]].push_back(m.great_circle_deg);
    lat[loc_of[i]].push_back(m.lateral_error_deg);
    pol[loc_of[i]].push_back(m.polar_error_deg);
    if (!m.is_quadrant_error) pol_local[loc_of[i]].push_back(m.polar_error_deg);
    fb += m.confusion == ConfusionClass::FrontBack ? 1 : 0;
    quad += m.is_quadrant_error ? 1 : 0;
    near_axis += m.near_interaural_axis ? 1 : 0;
  }
  ParticipantSummary s;
  s.participant = participant;
  s.condition = condition;
  s.n_trials = trials.size();
  s.n_locations = nl;
  s.n_near_axis = near_axis;
  s.great_circle_deg = detail::location_stats(gc).accuracy;
  const auto l = detail::location_stats(lat);
  s.lateral_accuracy_deg = l.accuracy;
  s.lateral_precision_deg = l.precision;
  const auto p = detail::location_stats(pol);
  s.polar_accuracy_deg = p.accuracy;
  s.polar_precision_deg = p.precision;
  const auto pl = detail::location_stats(pol_local);
  s.polar_accuracy_local_deg = pl.accuracy;
  s.polar_precision_local_deg = pl.precision;
  const double n = static_cast<double>(trials.size());
  s.front_back_rate_pct = 100.0 * static_cast<double>(fb) / n;
  s.quadrant_error_pct = 100.0 * static_cast<double>(quad) / n;
  return s;
}

/// Conditions in order of first appearance in the log.
inline std::vector<std::string> conditions_of(const ResponseLog& log) {
  std::vector<std::string> out;
  for (const auto& t : log.trials) {
    if (std::find(out.begin(), out.end(), t.condition) == out.end()) out.push_back(t.condition);
  }
  return out;
}

/// One summary per (participant, condition) present in the log, ordered by
/// participant id then condition order of appearance.
inline std::vector<ParticipantSummary> summarise_participants(const ResponseLog& log, const Options& opt = {}) {
  const auto conditions = conditions_of(log);
  std::map<std::string, std::vector<bool>> present;
  for (const auto& t : log.trials) {
    auto& row = present[t.participant];
    row.resize(conditions.size(), false);
    row[static_cast<std::size_t>(std::find(conditions.begin(), conditions.end(), t.condition) - conditions.begin())] = true;
  }
  std::vector<ParticipantSummary> rows;
  for (const auto& [participant, flags] : present) {
    for (std::size_t c = 0; c < conditions.size(); ++c) {
      if (flags[c]) rows.push_back(participant_summary(log, participant, conditions[c], opt));
    }
  }
  return rows;
}

struct GroupRow {
  std::string condition;
  Metric metric;
  stats::MedianIqr summary;
  std::size_t n_participants;
};

/// Median and IQR of participant medians per condition and metric. NaN
/// participant values (undefined precision) are skipped.
inline std::vector<GroupRow> group_summary(std::span<const ParticipantSummary> rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "group summary of zero participants");
  std::vector<std::string> conditions;
  for (const auto& r : rows) {
    if (std::find(conditions.begin(), conditions.end(), r.condition) == conditions.end()) conditions.push_back(r.condition);
  }
  std::vector<GroupRow> out;
  for (const auto& c : conditions) {
    for (Metric m : kMetrics) {
      std::vector<double> v;
      for (const auto& r : rows) {
        if (r.condition == c && !std::isnan(r.value(m))) v.push_back(r.value(m));
      }
      if (v.empty()) {
        out.push_back({c, m, {detail::kNaN, detail::kNaN, detail::kNaN}, 0});
      } else {
        out.push_back({c, m, stats::median_iqr(v), v.size()});
      }
    }
  }
  return out;
}

/// Normality-gated omnibus and pairwise tests of one metric across
/// conditions. Only participants with a finite value in every condition
/// enter the design.
inline stats::ConditionComparison condition_tests(std::span<const ParticipantSummary> rows, Metric metric) {
  std::vector<std::string> conditions;
  for (const auto& r : rows) {
    if (std::find(conditions.begin(), conditions.end(), r.condition) == conditions.end()) conditions.push_back(r.condition);
  }
  if (conditions.size() < 2) throw Error(ErrorCode::DegenerateShape, "condition tests need >= 2 conditions");
  std::map<std::string, std::vector<double>> by_participant;
  for (const auto& r : rows) {
    auto& v = by_participant[r.participant];
    v.resize(conditions.size(), detail::kNaN);
    v[static_cast<std::size_t>(std::find(conditions.begin(), conditions.end(), r.condition) - conditions.begin())] = r.value(metric);
  }
  std::vector<std::vector<double>> complete;
  std::size_t dropped = 0;
  for (const auto& [p, v] : by_participant) {
    if (std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
      complete.push_back(v);
    } else {
      ++dropped;
    }
  }
  if (complete.size() < 3) {
    throw Error(ErrorCode::InsufficientSubjects, "condition tests for " + to_string(metric) + " need >= 3 complete participants, got " +
                                                     std::to_string(complete.size()));
  }
  stats::Matrix m(complete.size(), conditions.size());
  for (std::size_t r = 0; r < complete.size(); ++r) {
    for (std::size_t c = 0; c < conditions.size(); ++c) m(r, c) = complete[r][c];
  }
  auto res = stats::compare_conditions(m, conditions);
  if (dropped > 0) res.trail.insert(res.trail.begin(), std::to_string(dropped) + " incomplete participants dropped");
  return res;
}

/// Pearson correlation between per-participant LSD (measured vs non-individual)
/// and the performance difference (non-individual minus individual).
inline stats::StatResult lsd_performance_correlation(std::span<const double> lsd_per_participant,
                                                     std::span<const double> perf_diff_per_participant) {
  auto r = stats::pearson(lsd_per_participant, perf_diff_per_participant);
  r.test = "lsd_performance_pearson";
  return r;
}

}  // namespace hrtfeval::behaviour
