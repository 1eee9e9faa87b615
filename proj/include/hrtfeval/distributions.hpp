#pragma once

// Distribution functions used by the tests in stats.hpp. Student t, chi-square
// and F come from Boost.Math; the studentized range is integrated here.

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "hrtfeval/numeric.hpp"

namespace hrtfeval::dist {

inline double clamp_p(double p) {
  if (std::isnan(p)) return 1.0;
  return std::clamp(p, 0.0, 1.0);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

inline double t_cdf(double t, double df) {
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  return boost::math::cdf(boost::math::students_t_distribution<double>(df), t);
}

/// Two-sided p for a t statistic.
inline double t_two_sided_p(double t, double df) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t_distribution<double> d(df);
  return clamp_p(2.0 * boost::math::cdf(boost::math::complement(d, std::fabs(t))));
}

inline double t_quantile(double p, double df) {
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

inline double chi2_sf(double x, double df) {
  if (!(x > 0.0)) return 1.0;
  if (std::isinf(x)) return 0.0;
  return clamp_p(boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), x)));
}

inline double f_sf(double f, double df1, double df2) {
  if (!(f > 0.0)) return 1.0;
  if (std::isinf(f)) return 0.0;
  return clamp_p(
      boost::math::cdf(boost::math::complement(boost::math::fisher_f_distribution<double>(df1, df2), f)));
}

namespace detail {

/// P(range of k iid standard normals <= w).
inline double normal_range_cdf(double w, int k) {
  if (!(w > 0.0)) return 0.0;
  if (k == 2) return std::erf(w / 2.0);  // 2 Phi(w / sqrt 2) - 1
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * kPi);
  auto integrand = [&](double z) {
    const double diff = 0.5 * (std::erfc(-z * inv_sqrt2) - std::erfc((w - z) * inv_sqrt2));
    if (diff <= 0.0) return 0.0;
    return inv_sqrt2pi * std::exp(-0.5 * z * z) * std::pow(diff, k - 1);
  };
  // phi(z) is below 1e-18 outside [-9, 9 + w]
  const double val = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, -9.0, 9.0 + w, 12, 1e-13);
  return std::clamp(static_cast<double>(k) * val, 0.0, 1.0);
}

}  // namespace detail

/// CDF of the studentized range q with k groups and df error degrees of
/// freedom: integral over s = sqrt(chi2_df / df) of P(range <= q s).
inline double studentized_range_cdf(double q, int k, double df) {
  if (!(q > 0.0)) return 0.0;
  if (std::isinf(q)) return 1.0;
  if (std::isinf(df)) return detail::normal_range_cdf(q, k);
  const double log_norm = 0.5 * df * std::log(df) - std::lgamma(0.5 * df) - (0.5 * df - 1.0) * std::log(2.0);
  auto integrand = [&](double s) {
    if (s <= 0.0) return 0.0;
    const double log_f = log_norm + (df - 1.0) * std::log(s) - 0.5 * df * s * s;
    const double f = std::exp(log_f);
    if (f == 0.0) return 0.0;
    return f * detail::normal_range_cdf(q * s, k);
  };
  const double sigma = 1.0 / std::sqrt(2.0 * df);
  const double lo = std::max(0.0, 1.0 - 12.0 * sigma);
  const double hi = df > 100.0 ? 1.0 + 16.0 * sigma : 1.0 + 16.0 * std::max(sigma, 0.5);
  // Split at the mode so the adaptive rule sees the peak for large df.
  const double mode = df > 1.0 ? std::sqrt((df - 1.0) / df) : 0.5 * hi;
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  const double a = GK::integrate(integrand, lo, mode, 15, 1e-12);
  const double b = GK::integrate(integrand, mode, hi, 15, 1e-12);
  return std::clamp(a + b, 0.0, 1.0);
}

inline double studentized_range_sf(double q, int k, double df) {
  return clamp_p(1.0 - studentized_range_cdf(q, k, df));
}

}  // namespace hrtfeval::dist
