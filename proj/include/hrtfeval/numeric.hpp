#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace hrtfeval {

constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Neumaier-compensated accumulator. Reductions go through this so that a
/// sum does not depend (beyond rounding of the final result) on how the
/// terms were ordered or split across workers.
class StableSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  void merge(const StableSum& other) {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double stable_sum(std::span<const double> values) {
  StableSum acc;
  for (double v : values) acc.add(v);
  return acc.value();
}

inline double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return stable_sum(values) / static_cast<double>(values.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double sample_sd(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double m = mean(values);
  StableSum ss;
  for (double v : values) ss.add((v - m) * (v - m));
  return std::sqrt(ss.value() / static_cast<double>(n - 1));
}

/// Wrap an angle in degrees into [0, 360).
inline double wrap_360(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  if (r >= 360.0) r -= 360.0;
  return r;
}

/// Wrap an angle in degrees into (-180, 180].
inline double wrap_180(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r > 180.0) r -= 360.0;
  if (r <= -180.0) r += 360.0;
  return r;
}

}  // namespace hrtfeval
