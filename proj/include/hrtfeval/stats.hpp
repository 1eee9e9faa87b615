#pragma once

// Descriptive statistics, normality, paired omnibus tests, post-hoc tests,
// multiple-comparison corrections and correlation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hrtfeval/distributions.hpp"
#include "hrtfeval/error.hpp"
#include "hrtfeval/numeric.hpp"

namespace hrtfeval::stats {

struct StatResult {
  std::string test;
  double statistic = 0.0;
  std::optional<double> df1;
  std::optional<double> df2;
  double p = 1.0;
  std::optional<double> p_adjusted;
  std::string correction;  ///< "holm", "bh", "tukey" or empty
  std::size_t n = 0;
  std::string note;
};

/// Dense row-major matrix; rows are subjects, columns conditions or bins.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Descriptives

/// Linear-interpolation quantile (Hyndman & Fan type 7) of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double prob) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct MedianIqr {
  double median;
  double p25;
  double p75;
};

inline MedianIqr median_iqr(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "median_iqr of an empty sample");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  return {quantile_sorted(s, 0.5), quantile_sorted(s, 0.25), quantile_sorted(s, 0.75)};
}

inline double median(std::span<const double> values) { return median_iqr(values).median; }

/// Mid-ranks (1-based) of `values`; also returns sum of (t^3 - t) over tie groups.
inline std::pair<std::vector<double>, double> mid_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = r;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  return {std::move(ranks), tie_term};
}

// ---------------------------------------------------------------------------
// Shapiro-Wilk (Royston 1992 approximation, algorithm AS R94)

namespace detail {

inline double poly(const double* cc, int nord, double x) {
  double ret = cc[0];
  if (nord > 1) {
    double p = x * cc[nord - 1];
    for (int j = nord - 2; j > 0; --j) p = (p + cc[j]) * x;
    ret += p;
  }
  return ret;
}

}  // namespace detail

inline StatResult shapiro_wilk(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 3 || n > 5000) {
    throw Error(ErrorCode::OutOfRangeN, "Shapiro-Wilk needs 3 <= n <= 5000, got " + std::to_string(n));
  }
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (!(range > 0.0)) throw Error(ErrorCode::ZeroVariance, "Shapiro-Wilk on a constant sample");

  static constexpr double c1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
  static constexpr double c2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
  static constexpr double c3[] = {0.544, -0.39978, 0.025054, -6.714e-4};
  static constexpr double c4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr double c5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr double c6[] = {-0.4803, -0.082676, 0.0030302};
  static constexpr double g[] = {-2.273, 0.459};

  const std::size_t half = n / 2;
  const double an = static_cast<double>(n);
  // a[i] for i < half, the coefficient of the (n-1-i)-th minus the i-th order statistic
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = dist::normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = detail::poly(c1, 6, rsn) - m[0] / ssumm2;
    std::size_t first;
    double fac;
    if (n > 5) {
      first = 2;
      const double a2 = -m[1] / ssumm2 + detail::poly(c2, 6, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
    } else {
      first = 1;
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first; i < half; ++i) a[i] = -m[i] / fac;
  }

  const double xm = mean(x);
  StableSum ss, num;
  for (double v : x) ss.add((v - xm) * (v - xm));
  for (std::size_t i = 0; i < half; ++i) num.add(a[i] * (x[n - 1 - i] - x[i]));
  double w = num.value() * num.value() / ss.value();
  w = std::min(w, 1.0);

  StatResult r;
  r.test = "shapiro_wilk";
  r.statistic = w;
  r.n = n;
  if (n == 3) {
    constexpr double pi6 = 1.90985931710274;  // 6 / pi
    constexpr double stqr = 1.04719755119660;  // pi / 3
    r.p = std::max(0.0, pi6 * (std::asin(std::sqrt(w)) - stqr));
    r.p = dist::clamp_p(r.p);
    return r;
  }
  const double w1 = 1.0 - w;
  if (!(w1 > 0.0)) {
    r.p = 1.0;
    return r;
  }
  double y = std::log(w1);
  const double lxx = std::log(an);
  double mu, sigma;
  if (n <= 11) {
    const double gamma = detail::poly(g, 2, an);
    if (y >= gamma) {
      r.p = 1e-99;
      return r;
    }
    y = -std::log(gamma - y);
    mu = detail::poly(c3, 4, an);
    sigma = std::exp(detail::poly(c4, 4, an));
  } else {
    mu = detail::poly(c5, 4, lxx);
    sigma = std::exp(detail::poly(c6, 3, lxx));
  }
  r.p = dist::clamp_p(dist::normal_sf((y - mu) / sigma));
  return r;
}

// ---------------------------------------------------------------------------
// t tests

inline StatResult t_test_one_sample(std::span<const double> values, double mu0 = 0.0) {
  const std::size_t n = values.size();
  if (n < 2) throw Error(ErrorCode::InsufficientSubjects, "one-sample t-test needs n >= 2");
  const double m = mean(values);
  const double sd = sample_sd(values);
  if (!(sd > 0.0)) throw Error(ErrorCode::ZeroVariance, "one-sample t-test on a constant sample");
  StatResult r;
  r.test = "t_test_one_sample";
  r.statistic = (m - mu0) / (sd / std::sqrt(static_cast<double>(n)));
  r.df1 = static_cast<double>(n - 1);
  r.p = dist::t_two_sided_p(r.statistic, *r.df1);
  r.n = n;
  return r;
}

inline StatResult t_test_paired(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "paired t-test on unequal lengths");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  StatResult r = t_test_one_sample(d, 0.0);
  r.test = "t_test_paired";
  return r;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank

inline constexpr std::size_t kWilcoxonExactMaxN = 25;

/// Exact two-sided p for the signed-rank statistic. Ranks are doubled so that
/// mid-ranks stay integral; the null distribution of the doubled W+ is counted
/// over all 2^n sign assignments.
inline double wilcoxon_exact_p(std::span<const double> ranks, double w_min) {
  std::vector<std::uint64_t> r2(ranks.size());
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    r2[i] = static_cast<std::uint64_t>(std::llround(2.0 * ranks[i]));
    total += r2[i];
  }
  std::vector<double> counts(total + 1, 0.0);  // exact while 2^n < 2^53
  counts[0] = 1.0;
  std::uint64_t reach = 0;
  for (std::uint64_t r : r2) {
    for (std::uint64_t s = reach + 1; s-- > 0;) counts[s + r] += counts[s];
    reach += r;
  }
  const auto limit = static_cast<std::uint64_t>(std::llround(2.0 * w_min));
  double tail = 0.0;
  for (std::uint64_t s = 0; s <= limit && s <= total; ++s) tail += counts[s];
  const double p = 2.0 * tail / std::ldexp(1.0, static_cast<int>(ranks.size()));
  return std::min(1.0, p);
}

inline StatResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "Wilcoxon on unequal lengths");
  std::vector<double> d;
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i] - y[i];
    if (v == 0.0) {
      ++zeros;
    } else {
      d.push_back(v);
    }
  }
  if (d.empty()) throw Error(ErrorCode::AllZeroDifferences, "all paired differences are zero");
  std::vector<double> absd(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) absd[i] = std::fabs(d[i]);
  const auto [ranks, tie_term] = mid_ranks(absd);
  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? w_plus : w_minus) += ranks[i];

  StatResult r;
  r.test = "wilcoxon_signed_rank";
  r.statistic = std::min(w_plus, w_minus);
  r.n = d.size();
  r.note = "w_plus=" + std::to_string(w_plus) + " w_minus=" + std::to_string(w_minus) +
           " zero_differences_dropped=" + std::to_string(zeros);
  const double n = static_cast<double>(d.size());
  if (d.size() <= kWilcoxonExactMaxN) {
    r.p = wilcoxon_exact_p(ranks, r.statistic);
    r.note += " method=exact";
  } else {
    const double mu = n * (n + 1.0) / 4.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (std::fabs(r.statistic - mu) - 0.5) / std::sqrt(var);
    r.p = dist::clamp_p(2.0 * dist::normal_sf(std::max(z, 0.0)));
    r.note += " method=normal_cc";
  }
  return r;
}

// ---------------------------------------------------------------------------
// Repeated-measures omnibus tests

inline void require_shape(const Matrix& m, const char* what) {
  if (m.cols() < 2 || m.rows() < 2) {
    throw Error(ErrorCode::DegenerateShape, std::string(what) + " needs >= 2 subjects and >= 2 conditions, got " +
                                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (double v : m.row(r)) {
      if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateShape, std::string(what) + " needs complete finite data");
    }
  }
}

inline StatResult friedman(const Matrix& m) {
  require_shape(m, "Friedman test");
  const double n = static_cast<double>(m.rows());
  const double k = static_cast<double>(m.cols());
  std::vector<double> rank_sums(m.cols(), 0.0);
  double tie_total = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto [ranks, tie_term] = mid_ranks(m.row(r));
    for (std::size_t c = 0; c < m.cols(); ++c) rank_sums[c] += ranks[c];
    tie_total += tie_term;
  }
  double sum_sq = 0.0;
  for (double rs : rank_sums) sum_sq += rs * rs;
  const double raw = 12.0 / (n * k * (k + 1.0)) * sum_sq - 3.0 * n * (k + 1.0);
  const double correction = 1.0 - tie_total / (n * (k * k * k - k));
  StatResult res;
  res.test = "friedman";
  res.df1 = k - 1.0;
  res.n = m.rows();
  if (correction <= 0.0) {
    res.statistic = 0.0;
    res.p = 1.0;
    res.note = "all values tied within every subject";
    return res;
  }
  res.statistic = std::max(0.0, raw / correction);
  res.p = dist::chi2_sf(res.statistic, k - 1.0);
  return res;
}

struct RmAnova {
  double ss_condition = 0.0;
  double ss_subject = 0.0;
  double ss_error = 0.0;
  double df_condition = 0.0;
  double df_error = 0.0;
  double ms_error = 0.0;
  std::vector<double> condition_means;
  std::size_t n_subjects = 0;
  StatResult result;
};

inline RmAnova rm_anova_fit(const Matrix& m) {
  require_shape(m, "repeated-measures ANOVA");
  const std::size_t n = m.rows(), k = m.cols();
  RmAnova fit;
  fit.n_subjects = n;
  StableSum grand_acc;
  std::vector<double> subj_mean(n), cond_mean(k);
  for (std::size_t r = 0; r < n; ++r) {
    StableSum s;
    for (std::size_t c = 0; c < k; ++c) {
      s.add(m(r, c));
      grand_acc.add(m(r, c));
    }
    subj_mean[r] = s.value() / static_cast<double>(k);
  }
  for (std::size_t c = 0; c < k; ++c) {
    StableSum s;
    for (std::size_t r = 0; r < n; ++r) s.add(m(r, c));
    cond_mean[c] = s.value() / static_cast<double>(n);
  }
  const double grand = grand_acc.value() / static_cast<double>(n * k);
  StableSum ssc, sss, sse;
  for (std::size_t c = 0; c < k; ++c) ssc.add((cond_mean[c] - grand) * (cond_mean[c] - grand));
  for (std::size_t r = 0; r < n; ++r) sss.add((subj_mean[r] - grand) * (subj_mean[r] - grand));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < k; ++c) {
      const double e = m(r, c) - subj_mean[r] - cond_mean[c] + grand;
      sse.add(e * e);
    }
  }
  fit.ss_condition = static_cast<double>(n) * ssc.value();
  fit.ss_subject = static_cast<double>(k) * sss.value();
  fit.ss_error = sse.value();
  fit.df_condition = static_cast<double>(k - 1);
  fit.df_error = static_cast<double>((k - 1) * (n - 1));
  fit.ms_error = fit.ss_error / fit.df_error;
  fit.condition_means = cond_mean;

  StatResult& res = fit.result;
  res.test = "rm_anova";
  res.df1 = fit.df_condition;
  res.df2 = fit.df_error;
  res.n = n;
  const double ms_cond = fit.ss_condition / fit.df_condition;
  if (fit.ss_condition == 0.0) {
    res.statistic = 0.0;
    res.p = 1.0;
  } else if (fit.ms_error == 0.0) {
    res.statistic = std::numeric_limits<double>::infinity();
    res.p = 0.0;
    res.note = "zero residual variance";
  } else {
    res.statistic = ms_cond / fit.ms_error;
    res.p = dist::f_sf(res.statistic, fit.df_condition, fit.df_error);
  }
  return fit;
}

inline StatResult rm_anova_one_way(const Matrix& m) { return rm_anova_fit(m).result; }

struct PairwiseResult {
  std::size_t a;
  std::size_t b;
  StatResult result;
};

/// Tukey HSD on a repeated-measures design, using the ANOVA error mean square.
inline std::vector<PairwiseResult> tukey_hsd(const Matrix& m) {
  const RmAnova fit = rm_anova_fit(m);
  const std::size_t k = m.cols();
  const double se = std::sqrt(fit.ms_error / static_cast<double>(fit.n_subjects));
  std::vector<PairwiseResult> out;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      const double diff = std::fabs(fit.condition_means[a] - fit.condition_means[b]);
      StatResult r;
      r.test = "tukey_hsd";
      r.df1 = static_cast<double>(k);
      r.df2 = fit.df_error;
      r.n = fit.n_subjects;
      r.correction = "tukey";
      if (diff == 0.0) {
        r.statistic = 0.0;
      } else if (se == 0.0) {
        r.statistic = std::numeric_limits<double>::infinity();
      } else {
        r.statistic = diff / se;
      }
      r.p = dist::studentized_range_sf(r.statistic, static_cast<int>(k), fit.df_error);
      r.p_adjusted = r.p;
      out.push_back({a, b, r});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multiple-comparison corrections

inline std::vector<double> holm_adjust(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> adj(m);
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double v = std::min(1.0, static_cast<double>(m - i) * p[order[i]]);
    running = std::max(running, v);
    adj[order[i]] = running;
  }
  return adj;
}

inline std::vector<double> bh_fdr_adjust(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> adj(m);
  double running = 1.0;
  for (std::size_t i = m; i-- > 0;) {
    const double v = std::min(1.0, p[order[i]] * static_cast<double>(m) / static_cast<double>(i + 1));
    running = std::min(running, v);
    // p * m / rank can round one ulp below p when rank == m
    adj[order[i]] = std::max(running, p[order[i]]);
  }
  return adj;
}

// ---------------------------------------------------------------------------
// Correlation

inline StatResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::ShapeMismatch, "pearson on unequal lengths");
  const std::size_t n = x.size();
  if (n < 3) throw Error(ErrorCode::InsufficientSubjects, "pearson needs n >= 3");
  const double mx = mean(x), my = mean(y);
  StableSum sxx, syy, sxy;
  for (std::size_t i = 0; i < n; ++i) {
    sxx.add((x[i] - mx) * (x[i] - mx));
    syy.add((y[i] - my) * (y[i] - my));
    sxy.add((x[i] - mx) * (y[i] - my));
  }
  if (!(sxx.value() > 0.0) || !(syy.value() > 0.0)) throw Error(ErrorCode::ConstantInput, "pearson on a constant input");
  StatResult r;
  r.test = "pearson";
  r.statistic = std::clamp(sxy.value() / std::sqrt(sxx.value() * syy.value()), -1.0, 1.0);
  r.df1 = static_cast<double>(n - 2);
  r.n = n;
  const double one_minus = 1.0 - r.statistic * r.statistic;
  if (one_minus <= 0.0) {
    r.p = 0.0;
  } else {
    const double t = r.statistic * std::sqrt(static_cast<double>(n - 2) / one_minus);
    r.p = dist::t_two_sided_p(t, static_cast<double>(n - 2));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Normality-gated condition comparison

enum class TestRoute { Parametric, NonParametric };

struct ConditionComparison {
  std::vector<std::string> conditions;
  std::vector<std::optional<StatResult>> normality;  ///< per condition, empty if not computable
  TestRoute route = TestRoute::NonParametric;
  StatResult omnibus;
  std::vector<PairwiseResult> pairwise;
  std::vector<std::string> trail;
};

/// Shapiro-Wilk on every condition column; if all are normal at `alpha`,
/// repeated-measures ANOVA + Tukey HSD, otherwise Friedman + pairwise Wilcoxon
/// signed-rank with Holm correction.
inline ConditionComparison compare_conditions(const Matrix& m, std::vector<std::string> names, double alpha = 0.05) {
  if (m.rows() < 3) {
    throw Error(ErrorCode::InsufficientSubjects, "condition comparison needs >= 3 subjects, got " + std::to_string(m.rows()));
  }
  if (m.cols() < 2) throw Error(ErrorCode::DegenerateShape, "condition comparison needs >= 2 conditions");
  ConditionComparison out;
  out.conditions = std::move(names);
  bool all_normal = true;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const auto col = m.column(c);
    try {
      auto sw = shapiro_wilk(col);
      out.trail.push_back("shapiro_wilk[" + out.conditions[c] + "] W=" + std::to_string(sw.statistic) +
                          " p=" + std::to_string(sw.p));
      if (sw.p < alpha) all_normal = false;
      out.normality.push_back(sw);
    } catch (const Error& e) {
      out.trail.push_back("shapiro_wilk[" + out.conditions[c] + "] not computable (" + e.what() + "), treated as non-normal");
      out.normality.push_back(std::nullopt);
      all_normal = false;
    }
  }
  if (all_normal) {
    out.route = TestRoute::Parametric;
    out.trail.push_back("all conditions normal: rm_anova + tukey_hsd");
    out.omnibus = rm_anova_one_way(m);
    out.pairwise = tukey_hsd(m);
    return out;
  }
  out.route = TestRoute::NonParametric;
  out.trail.push_back("normality rejected or undetermined: friedman + wilcoxon (holm)");
  out.omnibus = friedman(m);
  std::vector<double> raw;
  for (std::size_t a = 0; a < m.cols(); ++a) {
    for (std::size_t b = a + 1; b < m.cols(); ++b) {
      const auto xa = m.column(a), xb = m.column(b);
      StatResult r;
      try {
        r = wilcoxon_signed_rank(xa, xb);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::AllZeroDifferences) throw;
        r.test = "wilcoxon_signed_rank";
        r.statistic = 0.0;
        r.p = 1.0;
        r.n = 0;
        r.note = "all differences zero";
      }
      raw.push_back(r.p);
      out.pairwise.push_back({a, b, r});
    }
  }
  const auto adj = holm_adjust(raw);
  for (std::size_t i = 0; i < adj.size(); ++i) {
    out.pairwise[i].result.p_adjusted = adj[i];
    out.pairwise[i].result.correction = "holm";
  }
  return out;
}

}  // namespace hrtfeval::stats
