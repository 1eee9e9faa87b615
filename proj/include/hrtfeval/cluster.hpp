#pragma once

// Cluster-based permutation test over frequency bins for a paired design.
//
// Per bin, a paired t statistic is computed on a - b. Adjacent bins whose
// two-sided p is below the cluster-forming alpha and whose t has the same sign
// form a cluster with mass sum |t|. The null distribution of the largest
// cluster mass is built by flipping the sign of each subject's difference
// vector; every permutation draws its flips from SplitMix64::stream(seed, i),
// so any partition of the permutations over threads gives the same result.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "hrtfeval/distributions.hpp"
#include "hrtfeval/rng.hpp"
#include "hrtfeval/stats.hpp"

namespace hrtfeval::stats {

enum class HigherCondition { A, B };

struct Cluster {
  std::size_t first_bin;
  std::size_t last_bin;  ///< inclusive
  double mass;
  double p_raw;
  double p_adjusted;
  HigherCondition higher;
};

struct ClusterResult {
  std::vector<Cluster> clusters;
  std::size_t n_permutations = 0;
  std::uint64_t seed = 0;
  double alpha_cluster = 0.05;
  std::string correction = "bh";
};

struct ClusterOptions {
  double alpha_cluster = 0.05;
  std::size_t n_permutations = 999;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
};

namespace detail {

struct RawCluster {
  std::size_t first;
  std::size_t last;
  double mass;
};

/// Paired t per bin from the per-bin sums of d and d^2.
inline void paired_t(std::span<const double> sum, std::span<const double> sumsq, double n, std::vector<double>& t) {
  for (std::size_t k = 0; k < sum.size(); ++k) {
    const double m = sum[k] / n;
    const double var = (sumsq[k] - sum[k] * m) / (n - 1.0);
    if (var > 0.0) {
      t[k] = m / std::sqrt(var / n);
    } else if (m == 0.0) {
      t[k] = 0.0;
    } else {
      t[k] = m > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    }
  }
}

inline std::vector<RawCluster> find_clusters(std::span<const double> t, double t_crit) {
  std::vector<RawCluster> out;
  for (std::size_t k = 0; k < t.size();) {
    if (!(std::fabs(t[k]) > t_crit)) {
      ++k;
      continue;
    }
    const bool positive = t[k] > 0;
    RawCluster c{k, k, 0.0};
    while (k < t.size() && std::fabs(t[k]) > t_crit && (t[k] > 0) == positive) {
      c.mass += std::fabs(t[k]);
      c.last = k;
      ++k;
    }
    out.push_back(c);
  }
  return out;
}

inline double max_mass(std::span<const double> t, double t_crit) {
  double best = 0.0, run = 0.0;
  int sign = 0;
  for (double v : t) {
    if (std::fabs(v) > t_crit) {
      const int s = v > 0 ? 1 : -1;
      run = (s == sign) ? run + std::fabs(v) : std::fabs(v);
      sign = s;
      best = std::max(best, run);
    } else {
      run = 0.0;
      sign = 0;
    }
  }
  return best;
}

}  // namespace detail

/// Largest cluster mass for each sign-flip permutation 0 .. n_permutations-1.
inline std::vector<double> cluster_null_distribution(const Matrix& diff, double t_crit, std::size_t n_permutations,
                                                     std::uint64_t seed, unsigned jobs = 1) {
  const std::size_t n = diff.rows(), bins = diff.cols();
  std::vector<double> sumsq(bins, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < bins; ++k) sumsq[k] += diff(r, k) * diff(r, k);
  }
  std::vector<double> null(n_permutations, 0.0);
  auto worker = [&](std::size_t begin, std::size_t end) {
    std::vector<double> sum(bins), t(bins);
    std::vector<double> signs(n);
    for (std::size_t i = begin; i < end; ++i) {
      SplitMix64 rng = SplitMix64::stream(seed, i);
      std::uint64_t bits = 0;
      for (std::size_t r = 0; r < n; ++r) {
        if (r % 64 == 0) bits = rng();
        signs[r] = (bits >> (r % 64)) & 1U ? -1.0 : 1.0;
      }
      std::fill(sum.begin(), sum.end(), 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        const auto row = diff.row(r);
        const double s = signs[r];
        for (std::size_t k = 0; k < bins; ++k) sum[k] += s * row[k];
      }
      detail::paired_t(sum, sumsq, static_cast<double>(n), t);
      null[i] = detail::max_mass(t, t_crit);
    }
  };
  const unsigned workers = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(n_permutations)));
  if (workers == 1) {
    worker(0, n_permutations);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n_permutations + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t b = w * chunk, e = std::min(n_permutations, b + chunk);
      if (b < e) pool.emplace_back(worker, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return null;
}

/// Paired cluster permutation test of a against b (subjects x bins).
inline ClusterResult cluster_permutation_freq(const Matrix& a, const Matrix& b, const ClusterOptions& opt = {}) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "cluster test inputs differ in shape");
  }
  if (a.rows() < 3) throw Error(ErrorCode::InsufficientSubjects, "cluster test needs >= 3 subjects");
  if (opt.n_permutations < 1) throw Error(ErrorCode::InvalidConfig, "n_permutations must be >= 1");
  if (!(opt.alpha_cluster > 0.0 && opt.alpha_cluster < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "alpha_cluster must lie in (0, 1)");
  }
  const std::size_t n = a.rows(), bins = a.cols();
  Matrix diff(n, bins);
  std::vector<double> sum(bins, 0.0), sumsq(bins, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double d = a(r, k) - b(r, k);
      diff(r, k) = d;
      sum[k] += d;
      sumsq[k] += d * d;
    }
  }
  const double df = static_cast<double>(n - 1);
  // p < alpha  <=>  |t| > t_crit
  const double t_crit = dist::t_quantile(1.0 - opt.alpha_cluster / 2.0, df);
  std::vector<double> t(bins);
  detail::paired_t(sum, sumsq, static_cast<double>(n), t);
  const auto observed = detail::find_clusters(t, t_crit);

  ClusterResult res;
  res.n_permutations = opt.n_permutations;
  res.seed = opt.seed;
  res.alpha_cluster = opt.alpha_cluster;
  if (observed.empty()) return res;

  const auto null = cluster_null_distribution(diff, t_crit, opt.n_permutations, opt.seed, opt.jobs);
  std::vector<double> raw;
  for (const auto& c : observed) {
    std::size_t exceed = 0;
    for (double v : null) exceed += v >= c.mass ? 1 : 0;
    const double p = static_cast<double>(1 + exceed) / static_cast<double>(opt.n_permutations + 1);
    raw.push_back(p);
    StableSum ma, mb;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t k = c.first; k <= c.last; ++k) {
        ma.add(a(r, k));
        mb.add(b(r, k));
      }
    }
    res.clusters.push_back({c.first, c.last, c.mass, p, p, ma.value() >= mb.value() ? HigherCondition::A : HigherCondition::B});
  }
  const auto adj = bh_fdr_adjust(raw);
  for (std::size_t i = 0; i < adj.size(); ++i) res.clusters[i].p_adjusted = adj[i];
  return res;
}

}  // namespace hrtfeval::stats
