#pragma once

// Domain model shared by every module: directions in vertical-polar and
// interaural lateral-polar coordinates, HRIR sets and metric configuration.
//
// Azimuth follows the SOFA convention: 0 = front, 90 = listener's left,
// counterclockwise when viewed from above. Elevation is positive upwards.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hrtfeval/error.hpp"
#include "hrtfeval/numeric.hpp"

namespace hrtfeval {

enum class AzimuthConvention { CounterClockwise, Clockwise };

class Direction {
 public:
  static constexpr double kDefaultDistance = 1.5;

  Direction() = default;

  /// Azimuth is wrapped into [0, 360); |elevation| > 90 or a non-positive
  /// distance is rejected. At the poles the azimuth is stored as 0.
  Direction(double azimuth_deg, double elevation_deg, double distance_m = kDefaultDistance) {
    if (!std::isfinite(azimuth_deg) || !std::isfinite(elevation_deg) || !std::isfinite(distance_m)) {
      throw Error(ErrorCode::InvalidDirection, "non-finite coordinate");
    }
    if (std::fabs(elevation_deg) > 90.0) {
      std::ostringstream os;
      os << "elevation " << elevation_deg << " outside [-90, 90]";
      throw Error(ErrorCode::InvalidDirection, os.str());
    }
    if (!(distance_m > 0.0)) {
      throw Error(ErrorCode::InvalidDirection, "distance must be positive");
    }
    elevation_ = elevation_deg;
    azimuth_ = is_pole() ? 0.0 : wrap_360(azimuth_deg);
    distance_ = distance_m;
  }

  /// Builds a direction from an azimuth given in another convention.
  static Direction from_convention(double azimuth_deg, double elevation_deg, AzimuthConvention conv,
                                   double distance_m = kDefaultDistance) {
    const double az = conv == AzimuthConvention::Clockwise ? -azimuth_deg : azimuth_deg;
    return Direction(az, elevation_deg, distance_m);
  }

  double azimuth_deg() const { return azimuth_; }
  double elevation_deg() const { return elevation_; }
  double distance_m() const { return distance_; }
  bool is_pole() const { return std::fabs(elevation_) == 90.0; }

  /// Unit vector (x front, y left, z up).
  std::array<double, 3> unit_vector() const {
    if (elevation_ == 90.0) return {0.0, 0.0, 1.0};
    if (elevation_ == -90.0) return {0.0, 0.0, -1.0};
    // folding to (-180, 180] makes mirror images exact negatives in y
    const double az = deg_to_rad(azimuth_ > 180.0 ? azimuth_ - 360.0 : azimuth_);
    const double el = deg_to_rad(elevation_);
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
  }

  friend bool operator==(const Direction&, const Direction&) = default;

 private:
  double azimuth_ = 0.0;
  double elevation_ = 0.0;
  double distance_ = kDefaultDistance;
};

struct LateralPolar {
  double lateral_deg = 0.0;  ///< [-90, 90], positive towards the left ear
  double polar_deg = 0.0;    ///< [-90, 270), 0 front, 90 above, 180 rear
  bool degenerate = false;   ///< |lateral| == 90, polar undefined and set to 0
};

/// Great-circle angle between two directions, in [0, 180].
inline double great_circle_deg(const Direction& a, const Direction& b) {
  const auto u = a.unit_vector();
  const auto v = b.unit_vector();
  const double cx = u[1] * v[2] - u[2] * v[1];
  const double cy = u[2] * v[0] - u[0] * v[2];
  const double cz = u[0] * v[1] - u[1] * v[0];
  const double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
  return rad_to_deg(std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot));
}

inline LateralPolar to_lateral_polar(const Direction& d) {
  const auto [x, y, z] = d.unit_vector();
  LateralPolar lp;
  const double xz = std::hypot(x, z);
  // cos(90 deg) is not exactly zero in floating point; anything this close to
  // the interaural axis is treated as on it
  if (xz < 1e-14) {
    lp.lateral_deg = std::copysign(90.0, y);
    lp.degenerate = true;
    lp.polar_deg = 0.0;
    return lp;
  }
  lp.lateral_deg = rad_to_deg(std::atan2(y, xz));
  double polar = rad_to_deg(std::atan2(z, x));  // (-180, 180]
  if (polar < -90.0) polar += 360.0;
  if (polar >= 270.0) polar -= 360.0;
  lp.polar_deg = polar;
  return lp;
}

inline Direction from_lateral_polar(const LateralPolar& lp, double distance_m = Direction::kDefaultDistance) {
  const double lat = deg_to_rad(lp.lateral_deg);
  const double pol = deg_to_rad(lp.polar_deg);
  const double y = std::sin(lat);
  const double x = std::cos(lat) * std::cos(pol);
  const double z = std::cos(lat) * std::sin(pol);
  const double el = rad_to_deg(std::atan2(z, std::hypot(x, y)));
  const double az = rad_to_deg(std::atan2(y, x));
  return Direction(az, std::clamp(el, -90.0, 90.0), distance_m);
}

/// Reflects a direction through the frontal (coronal) plane.
inline Direction mirror_front_back(const Direction& d) {
  return Direction(180.0 - d.azimuth_deg(), d.elevation_deg(), d.distance_m());
}

enum class Ear { Left = 0, Right = 1 };

inline constexpr std::array<Ear, 2> kEars{Ear::Left, Ear::Right};

struct StereoImpulse {
  std::vector<double> left;
  std::vector<double> right;

  std::vector<double>& ear(Ear e) { return e == Ear::Left ? left : right; }
  const std::vector<double>& ear(Ear e) const { return e == Ear::Left ? left : right; }
};

/// Integer sample shifts applied by ITD removal, per ear.
struct ItdShift {
  int left = 0;
  int right = 0;
  friend bool operator==(const ItdShift&, const ItdShift&) = default;
};

struct HrirSet {
  static constexpr std::size_t kMinLength = 145;  // > 16 fade-in + 128 fade-out
  static constexpr double kUniqueDirectionDeg = 0.1;

  std::uint32_t sample_rate_hz = 48000;
  std::vector<Direction> directions;
  std::vector<StereoImpulse> impulses;
  /// Present if and only if the set has been through ITD removal.
  std::optional<std::vector<ItdShift>> itd_shifts;
  std::string label;
  std::string subject_id;

  std::size_t size() const { return directions.size(); }
  std::size_t length() const { return impulses.empty() ? 0 : impulses.front().left.size(); }
  bool no_itd() const { return itd_shifts.has_value(); }

  const std::vector<double>& ear(std::size_t d, Ear e) const { return impulses[d].ear(e); }

  /// Throws InvalidSet describing the first violated invariant.
  void validate() const {
    if (sample_rate_hz == 0) throw Error(ErrorCode::InvalidSet, "sample rate must be positive");
    if (directions.empty()) throw Error(ErrorCode::InvalidSet, "set has no directions");
    if (impulses.size() != directions.size()) {
      throw Error(ErrorCode::InvalidSet, "impulse count differs from direction count");
    }
    const std::size_t n = length();
    if (n < kMinLength) {
      throw Error(ErrorCode::InvalidSet,
                  "impulse length " + std::to_string(n) + " must exceed 144 samples");
    }
    for (std::size_t d = 0; d < impulses.size(); ++d) {
      if (impulses[d].left.size() != n || impulses[d].right.size() != n) {
        throw Error(ErrorCode::InvalidSet, "impulse length differs at direction " + std::to_string(d));
      }
    }
    if (itd_shifts && itd_shifts->size() != directions.size()) {
      throw Error(ErrorCode::InvalidSet, "itd_shifts count differs from direction count");
    }
    for (std::size_t i = 0; i < directions.size(); ++i) {
      for (std::size_t j = i + 1; j < directions.size(); ++j) {
        if (great_circle_deg(directions[i], directions[j]) < kUniqueDirectionDeg) {
          throw Error(ErrorCode::InvalidSet, "directions " + std::to_string(i) + " and " +
                                                 std::to_string(j) + " coincide");
        }
      }
    }
  }
};

struct MetricConfig {
  double epsilon = 1e-10;
  double onset_threshold_fraction = 0.20;
  unsigned upsample_factor = 10;
  std::optional<std::pair<double, double>> freq_band_hz;

  void validate() const {
    if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must be positive");
    if (!(onset_threshold_fraction > 0.0 && onset_threshold_fraction < 1.0)) {
      throw Error(ErrorCode::InvalidConfig, "onset_threshold_fraction must lie in (0, 1)");
    }
    if (upsample_factor < 1) throw Error(ErrorCode::InvalidConfig, "upsample_factor must be >= 1");
    if (freq_band_hz && !(freq_band_hz->first >= 0.0 && freq_band_hz->first <= freq_band_hz->second)) {
      throw Error(ErrorCode::InvalidConfig, "frequency band must satisfy 0 <= lo <= hi");
    }
  }
};

struct DirectionPair {
  std::size_t ref_index;
  std::size_t cand_index;
  double distance_deg;
};

inline constexpr double kDefaultMatchToleranceDeg = 0.5;

/// Pairs every reference direction with a distinct candidate direction within
/// `tol_deg`. Closest pairs are committed first, so a candidate claimed by two
/// references goes to the nearer one. Result is ordered by reference index.
inline std::vector<DirectionPair> match_directions(std::span<const Direction> cand,
                                                   std::span<const Direction> ref,
                                                   double tol_deg = kDefaultMatchToleranceDeg) {
  if (cand.empty() || ref.empty()) throw Error(ErrorCode::InvalidSet, "cannot match empty direction lists");
  std::vector<DirectionPair> options;
  for (std::size_t r = 0; r < ref.size(); ++r) {
    for (std::size_t c = 0; c < cand.size(); ++c) {
      const double dist = great_circle_deg(ref[r], cand[c]);
      if (dist <= tol_deg) options.push_back({r, c, dist});
    }
  }
  std::sort(options.begin(), options.end(), [](const DirectionPair& a, const DirectionPair& b) {
    if (a.distance_deg != b.distance_deg) return a.distance_deg < b.distance_deg;
    if (a.ref_index != b.ref_index) return a.ref_index < b.ref_index;
    return a.cand_index < b.cand_index;
  });
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> ref_to_cand(ref.size(), kNone);
  std::vector<double> dist(ref.size(), 0.0);
  std::vector<bool> cand_used(cand.size(), false);
  for (const auto& o : options) {
    if (ref_to_cand[o.ref_index] != kNone || cand_used[o.cand_index]) continue;
    ref_to_cand[o.ref_index] = o.cand_index;
    dist[o.ref_index] = o.distance_deg;
    cand_used[o.cand_index] = true;
  }
  std::vector<DirectionPair> pairs;
  pairs.reserve(ref.size());
  for (std::size_t r = 0; r < ref.size(); ++r) {
    if (ref_to_cand[r] == kNone) {
      std::ostringstream os;
      os << "reference direction " << r << " (az " << ref[r].azimuth_deg() << ", el "
         << ref[r].elevation_deg() << ") has no candidate within " << tol_deg << " deg";
      throw Error(ErrorCode::UnmatchedDirection, os.str());
    }
    pairs.push_back({r, ref_to_cand[r], dist[r]});
  }
  return pairs;
}

inline std::vector<DirectionPair> match_directions(const HrirSet& cand, const HrirSet& ref,
                                                   double tol_deg = kDefaultMatchToleranceDeg) {
  return match_directions(std::span<const Direction>(cand.directions),
                          std::span<const Direction>(ref.directions), tol_deg);
}

/// Index of the direction nearest to `target` within `tol_deg`, if any.
inline std::optional<std::size_t> find_direction(std::span<const Direction> dirs, const Direction& target,
                                                 double tol_deg = kDefaultMatchToleranceDeg) {
  std::optional<std::size_t> best;
  double best_dist = tol_deg;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const double dist = great_circle_deg(dirs[i], target);
    if (dist <= best_dist && (!best || dist < best_dist)) {
      best = i;
      best_dist = dist;
    }
  }
  return best;
}

}  // namespace hrtfeval
