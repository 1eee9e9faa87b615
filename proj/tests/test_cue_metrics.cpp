#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fixtures.hpp"
#include "hrtfeval/cue_metrics.hpp"

using namespace hrtfeval;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

// Independent oracle: direct O(N^2) DFT magnitude in dB.
std::vector<double> naive_log_mag(const std::vector<double>& x, double eps) {
  const std::size_t n = x.size();
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    long double re = 0, im = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const long double ang = -2.0L * 3.14159265358979323846264338327950288L * static_cast<long double>((i * k) % n) /
                              static_cast<long double>(n);
      re += x[i] * std::cos(ang);
      im += x[i] * std::sin(ang);
    }
    out[k] = 20.0 * std::log10(static_cast<double>(std::sqrt(re * re + im * im)) + eps);
  }
  return out;
}

HrirSet scaled(const HrirSet& s, double gl, double gr) {
  HrirSet out = s;
  for (auto& imp : out.impulses) {
    for (auto& v : imp.left) v *= gl;
    for (auto& v : imp.right) v *= gr;
  }
  return out;
}

}  // namespace

TEST(Itd, Examples) {
  HrirSet s;
  s.directions = {Direction(0, 0), Direction(90, 0)};
  s.impulses = {fixtures::pulse_pair(256, 10, 20), fixtures::pulse_pair(256, 33, 33)};
  EXPECT_NEAR(estimate_itd(s, 0, MetricConfig{}), 10.0 / 48000.0 * 1e6, 1e-9);
  EXPECT_NEAR(estimate_itd(s, 0, MetricConfig{}), 208.333333, 1e-6);
  EXPECT_EQ(estimate_itd(s, 1, MetricConfig{}), 0.0);
}

TEST(Itd, AntisymmetricUnderEarSwap) {
  auto s = fixtures::noise_set(fixtures::horizontal_ring(30), 256, 5);
  SplitMix64 rng(1);
  for (auto& imp : s.impulses) imp.right = shift_zero_wrapped(imp.right, static_cast<int>(rng() % 40));
  auto swapped = s;
  for (auto& imp : swapped.impulses) std::swap(imp.left, imp.right);
  for (std::size_t d = 0; d < s.size(); ++d) {
    EXPECT_EQ(estimate_itd(s, d, MetricConfig{}), -estimate_itd(swapped, d, MetricConfig{}));
  }
}

TEST(Ild, Examples) {
  const std::vector<double> l{0.1, -0.2, 0.3, 0.05};
  std::vector<double> r = l;
  for (auto& v : r) v *= 2.0;
  EXPECT_NEAR(ild_db(l, r, 1e-10), 6.0206, 1e-4);
  EXPECT_NEAR(ild_db(l, r, 1e-10), 20.0 * std::log10(2.0), 1e-8);
  EXPECT_EQ(ild_db(l, l, 1e-10), 0.0);
  const std::vector<double> z(16, 0.0);
  EXPECT_EQ(ild_db(z, z, 1e-10), 0.0);
  // right over left: louder right ear is positive
  EXPECT_GT(ild_db(l, r, 1e-10), 0.0);
}

TEST(Ild, GainInvariant) {
  // energies of order 1 so that epsilon is negligible at 1e-9 dB
  const auto s = scaled(fixtures::noise_set(fixtures::horizontal_ring(20), 256, 8), 10.0, 10.0);
  for (double k : {0.5, 2.0, 3.0, 1e3}) {
    const auto t = scaled(s, k, k);
    for (std::size_t d = 0; d < s.size(); ++d) {
      ASSERT_NEAR(ild_db(t, d, MetricConfig{}), ild_db(s, d, MetricConfig{}), 1e-9);
    }
  }
}

TEST(Lsd, IdentityAndUniformGain) {
  const auto ref = fixtures::noise_set(fixtures::horizontal_ring(45), 256, 2);
  const auto cand = scaled(ref, 2.0, 2.0);
  const DirectionPair p{3, 3, 0.0};
  EXPECT_EQ(lsd_db(ref, ref, p, Ear::Left, MetricConfig{}), 0.0);
  EXPECT_NEAR(lsd_db(cand, ref, p, Ear::Left, MetricConfig{}), 6.0206, 1e-4);
  EXPECT_NEAR(lsd_db(cand, ref, p, Ear::Right, MetricConfig{}), 20.0 * std::log10(2.0), 1e-6);
}

TEST(Lsd, MatchesBruteForceSpectra) {
  // reference: unit pulse (flat spectrum); candidate adds a cosine, which
  // boosts a single bin pair
  const std::size_t n = 256;
  HrirSet ref, cand;
  ref.directions = cand.directions = {Direction(0, 0)};
  ref.impulses = {fixtures::pulse_pair(n, 0, 0)};
  cand.impulses = ref.impulses;
  for (std::size_t i = 0; i < n; ++i) cand.impulses[0].left[i] += 0.5 * std::cos(2.0 * kPi * 10.0 * i / n) / (n / 2.0);
  const auto r_db = naive_log_mag(ref.impulses[0].left, 1e-10);
  const auto c_db = naive_log_mag(cand.impulses[0].left, 1e-10);
  double acc = 0;
  for (std::size_t k = 0; k < r_db.size(); ++k) acc += (c_db[k] - r_db[k]) * (c_db[k] - r_db[k]);
  const double oracle = std::sqrt(acc / static_cast<double>(r_db.size()));
  // bin 10 magnitude 1.5 -> 3.5218 dB, all others 0: sqrt(3.5218^2 / 129)
  EXPECT_NEAR(oracle, 20.0 * std::log10(1.5) / std::sqrt(129.0), 1e-9);
  EXPECT_NEAR(lsd_db(cand, ref, {0, 0, 0.0}, Ear::Left, MetricConfig{}), oracle, 1e-9);
}

TEST(Lsd, MatchesBruteForceOnNoiseAndOddLengths) {
  for (std::size_t n : {145U, 200U, 256U}) {
    const auto a = fixtures::noise_set({Direction(0, 0)}, n, 31);
    const auto b = fixtures::noise_set({Direction(0, 0)}, n, 32);
    const auto ca = naive_log_mag(a.impulses[0].right, 1e-10);
    const auto cb = naive_log_mag(b.impulses[0].right, 1e-10);
    double acc = 0;
    for (std::size_t k = 0; k < ca.size(); ++k) acc += (ca[k] - cb[k]) * (ca[k] - cb[k]);
    EXPECT_NEAR(lsd_db(a, b, {0, 0, 0.0}, Ear::Right, MetricConfig{}), std::sqrt(acc / ca.size()), 1e-8) << n;
  }
}

TEST(Lsd, BandRestriction) {
  const auto a = fixtures::noise_set({Direction(0, 0)}, 256, 1);
  const auto b = fixtures::noise_set({Direction(0, 0)}, 256, 2);
  MetricConfig cfg;
  cfg.freq_band_hz = std::make_pair(1000.0, 16000.0);
  const auto bins = band_bins(256, 48000, cfg.freq_band_hz);
  EXPECT_EQ(bins.first, 6U);    // 1125 Hz
  EXPECT_EQ(bins.second, 85U);  // 15937.5 Hz
  const auto ca = naive_log_mag(a.impulses[0].left, 1e-10);
  const auto cb = naive_log_mag(b.impulses[0].left, 1e-10);
  double acc = 0;
  for (std::size_t k = 6; k <= 85; ++k) acc += (ca[k] - cb[k]) * (ca[k] - cb[k]);
  EXPECT_NEAR(lsd_db(a, b, {0, 0, 0.0}, Ear::Left, cfg), std::sqrt(acc / 80.0), 1e-8);
  cfg.freq_band_hz = std::make_pair(100.0, 150.0);
  EXPECT_EQ(code_of([&] { lsd_db(a, b, {0, 0, 0.0}, Ear::Left, cfg); }), ErrorCode::EmptyBand);
}

TEST(Lsd, LengthMismatch) {
  const auto a = fixtures::noise_set({Direction(0, 0)}, 256, 1);
  const auto b = fixtures::noise_set({Direction(0, 0)}, 200, 2);
  EXPECT_EQ(code_of([&] { lsd_db(a, b, {0, 0, 0.0}, Ear::Left, MetricConfig{}); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([&] { compare_sets(a, b, MetricConfig{}); }), ErrorCode::LengthMismatch);
}

TEST(Lsd, PseudometricOnRandomSpectra) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto x = fixtures::noise_set({Direction(0, 0)}, 160, 3 * seed + 1);
    const auto y = fixtures::noise_set({Direction(0, 0)}, 160, 3 * seed + 2);
    const auto z = fixtures::noise_set({Direction(0, 0)}, 160, 3 * seed + 3);
    const DirectionPair p{0, 0, 0.0};
    const MetricConfig c;
    const double xy = lsd_db(x, y, p, Ear::Left, c), yx = lsd_db(y, x, p, Ear::Left, c);
    const double xz = lsd_db(x, z, p, Ear::Left, c), yz = lsd_db(y, z, p, Ear::Left, c);
    ASSERT_NEAR(xy, yx, 1e-12);
    ASSERT_GE(xy, 0.0);
    ASSERT_EQ(lsd_db(x, x, p, Ear::Left, c), 0.0);
    ASSERT_LE(xz, xy + yz + 1e-12);
  }
}

TEST(CompareSets, SelfComparisonIsExactlyZero) {
  const auto s = fixtures::noise_set(fixtures::horizontal_ring(15), 256, 12);
  const auto rep = compare_sets(s, s, MetricConfig{});
  ASSERT_EQ(rep.records.size(), s.size());
  for (const auto& r : rep.records) {
    EXPECT_EQ(r.itd_abs_err_us, 0.0);
    EXPECT_EQ(r.ild_abs_err_db, 0.0);
    EXPECT_EQ(r.lsd_left_db, 0.0);
    EXPECT_EQ(r.lsd_right_db, 0.0);
    EXPECT_EQ(r.lsd_signed_mean_db, 0.0);
  }
  EXPECT_EQ(rep.mean_abs_itd_us, 0.0);
  EXPECT_EQ(rep.mean_abs_ild_db, 0.0);
  EXPECT_EQ(rep.mean_lsd_db, 0.0);
}

TEST(CompareSets, HandBuiltOffsetsMatchOracleMeans) {
  // Pulse fixtures: direction d has left pulse at 50, right at 50 + d; the
  // candidate scales the right ear by g_d and delays it by s_d samples.
  const auto dirs = fixtures::horizontal_ring(45);
  HrirSet ref, cand;
  ref.directions = cand.directions = dirs;
  const std::vector<double> g{1.0, 2.0, 0.5, 1.0, 4.0, 1.0, 0.25, 1.0};
  const std::vector<int> shift{0, 1, 0, 3, 0, -2, 0, 5};
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    ref.impulses.push_back(fixtures::pulse_pair(256, 50, 50 + d));
    cand.impulses.push_back(fixtures::pulse_pair(256, 50, static_cast<std::size_t>(50 + static_cast<int>(d) + shift[d]), 1.0, g[d]));
  }
  MetricConfig cfg;
  cfg.upsample_factor = 1;
  const auto rep = compare_sets(cand, ref, cfg);
  // oracle values worked out by hand: |shift|/48 kHz, |20 log10 g|, and for
  // a pulse the right-ear spectrum is flat so LSD_R = |20 log10 g|, LSD_L = 0
  double itd = 0, ild = 0, lsd = 0;
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    itd += std::abs(shift[d]) / 48000.0 * 1e6;
    ild += std::fabs(20.0 * std::log10(g[d]));
    lsd += std::fabs(20.0 * std::log10(g[d]));
  }
  EXPECT_NEAR(rep.mean_abs_itd_us, itd / 8.0, 1e-9);
  EXPECT_NEAR(rep.mean_abs_ild_db, ild / 8.0, 1e-6);
  EXPECT_NEAR(rep.mean_lsd_db, lsd / 16.0, 1e-6);
  EXPECT_NEAR(rep.records[4].ild_signed_db, 20.0 * std::log10(4.0), 1e-6);
  EXPECT_NEAR(rep.records[6].lsd_signed_mean_db, 0.5 * 20.0 * std::log10(0.25), 1e-6);
  EXPECT_NEAR(rep.records[3].itd_signed_us(), 62.5, 1e-9);

  // internal consistency: aggregates equal recomputation from the records
  double a = 0, b = 0, c = 0;
  for (const auto& r : rep.records) {
    a += r.itd_abs_err_us;
    b += r.ild_abs_err_db;
    c += r.lsd_left_db + r.lsd_right_db;
    EXPECT_GE(r.itd_abs_err_us, 0.0);
    EXPECT_GE(r.ild_abs_err_db, 0.0);
  }
  EXPECT_NEAR(rep.mean_abs_itd_us, a / 8.0, 1e-12);
  EXPECT_NEAR(rep.mean_abs_ild_db, b / 8.0, 1e-12);
  EXPECT_NEAR(rep.mean_lsd_db, c / 16.0, 1e-12);
}

TEST(CompareSets, InvariantToDirectionOrder) {
  const auto ref = fixtures::noise_set(fixtures::horizontal_ring(30), 256, 40);
  const auto cand = fixtures::noise_set(fixtures::horizontal_ring(30), 256, 41);
  auto perm_ref = ref, perm_cand = cand;
  std::vector<std::size_t> order(ref.size());
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(3);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < order.size(); ++i) {
    perm_ref.directions[i] = ref.directions[order[i]];
    perm_ref.impulses[i] = ref.impulses[order[i]];
  }
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < order.size(); ++i) {
    perm_cand.directions[i] = cand.directions[order[i]];
    perm_cand.impulses[i] = cand.impulses[order[i]];
  }
  const auto a = compare_sets(cand, ref, MetricConfig{});
  const auto b = compare_sets(perm_cand, perm_ref, MetricConfig{});
  EXPECT_NEAR(a.mean_abs_itd_us, b.mean_abs_itd_us, 1e-12);
  EXPECT_NEAR(a.mean_abs_ild_db, b.mean_abs_ild_db, 1e-12);
  EXPECT_NEAR(a.mean_lsd_db, b.mean_lsd_db, 1e-12);
}

TEST(CompareSets, UnmatchedDirection) {
  const auto ref = fixtures::noise_set(fixtures::horizontal_ring(30), 256, 40);
  const auto cand = fixtures::noise_set(fixtures::horizontal_ring(45), 256, 41);
  EXPECT_EQ(code_of([&] { compare_sets(cand, ref, MetricConfig{}); }), ErrorCode::UnmatchedDirection);
}

TEST(FrequencyCurve, ZeroAndFlatGain) {
  std::vector<HrirSet> refs, same, doubled;
  for (std::uint64_t s = 0; s < 3; ++s) {
    refs.push_back(fixtures::noise_set(fixtures::horizontal_ring(60), 256, 100 + s));
    same.push_back(refs.back());
    doubled.push_back(scaled(refs.back(), 2.0, 2.0));
  }
  const auto zero = lsd_frequency_curve(same, refs, MetricConfig{});
  ASSERT_EQ(zero.freq_bins_hz.size(), 129U);
  for (std::size_t k = 0; k < 129; ++k) {
    EXPECT_EQ(zero.mean_db[k], 0.0);
    if (k) {
      EXPECT_GT(zero.freq_bins_hz[k], zero.freq_bins_hz[k - 1]);
    }
  }
  const auto flat = lsd_frequency_curve(doubled, refs, MetricConfig{});
  EXPECT_EQ(flat.n_subjects, 3U);
  for (std::size_t k = 0; k < 129; ++k) {
    EXPECT_NEAR(flat.mean_db[k], 6.0206, 1e-4);
    EXPECT_NEAR(flat.sd_db[k], 0.0, 1e-6);
  }
}

TEST(FrequencyCurve, SingleSubjectSingleDirectionReducesToPerBinValues) {
  const auto ref = fixtures::noise_set({Direction(0, 0)}, 200, 1);
  const auto cand = fixtures::noise_set({Direction(0, 0)}, 200, 2);
  const auto curve = lsd_frequency_curve(std::vector<HrirSet>{cand}, std::vector<HrirSet>{ref}, MetricConfig{});
  for (std::size_t k = 0; k < curve.mean_db.size(); ++k) {
    double acc = 0;
    for (Ear e : kEars) {
      const auto c = naive_log_mag(cand.impulses[0].ear(e), 1e-10);
      const auto r = naive_log_mag(ref.impulses[0].ear(e), 1e-10);
      acc += (c[k] - r[k]) * (c[k] - r[k]);
    }
    ASSERT_NEAR(curve.mean_db[k], std::sqrt(acc / 2.0), 1e-8);
  }
}

TEST(FrequencyCurve, HeterogeneousGrids) {
  const std::vector<HrirSet> a{fixtures::noise_set({Direction(0, 0)}, 256, 1), fixtures::noise_set({Direction(0, 0)}, 200, 2)};
  EXPECT_EQ(code_of([&] { lsd_frequency_curve(a, a, MetricConfig{}); }), ErrorCode::HeterogeneousGrids);
}

TEST(Grid, NodesAndBinning) {
  const auto nodes = grid_nodes(45.0);
  EXPECT_EQ(nodes.size(), 8U * 3U + 2U);
  EXPECT_EQ(nodes.front(), Direction(0, -90));
  EXPECT_EQ(nodes[nearest_node(nodes, Direction(20, 10))], Direction(0, 0));
  // exactly between az 0 and az 45: lower azimuth wins
  EXPECT_EQ(nodes[nearest_node(nodes, Direction(22.5, 0))], Direction(0, 0));
  EXPECT_EQ(nodes[nearest_node(nodes, Direction(300, 88))], Direction(0, 90));
  EXPECT_EQ(significance_tier(0.0009), 3);
  EXPECT_EQ(significance_tier(0.001), 2);
  EXPECT_EQ(significance_tier(0.049), 1);
  EXPECT_EQ(significance_tier(0.05), 0);
}

namespace {

CueReport report_with(const std::vector<std::pair<Direction, double>>& ild) {
  CueReport r;
  for (const auto& [d, v] : ild) {
    CueRecord rec;
    rec.direction = d;
    rec.ild_signed_db = v;
    rec.ild_abs_err_db = std::fabs(v);
    r.records.push_back(rec);
  }
  return r;
}

}  // namespace

TEST(SpatialGrid, AllZeroHasNoSignificantNodes) {
  std::vector<CueReport> reps;
  for (int s = 0; s < 5; ++s) {
    std::vector<std::pair<Direction, double>> v;
    for (const auto& d : grid_nodes(45)) v.emplace_back(d, 0.0);
    reps.push_back(report_with(v));
  }
  const auto g = spatial_grid_differences(reps, CueMetric::Ild);
  for (const auto& n : g.nodes) {
    EXPECT_EQ(n.status, NodeStatus::Tested);
    EXPECT_FALSE(n.significant);
    EXPECT_EQ(n.tier, 0);
    EXPECT_EQ(n.p_adjusted, 1.0);
  }
}

TEST(SpatialGrid, InjectedOffsetIsHighlySignificant) {
  std::vector<CueReport> reps;
  SplitMix64 rng(77);
  for (int s = 0; s < 20; ++s) {
    std::vector<std::pair<Direction, double>> v;
    for (const auto& d : grid_nodes(45)) {
      const double base = 0.3 * rng.normal();
      v.emplace_back(d, d == Direction(90, 0) ? 5.0 : base);
    }
    reps.push_back(report_with(v));
  }
  const auto g = spatial_grid_differences(reps, CueMetric::Ild);
  for (const auto& n : g.nodes) {
    ASSERT_GE(n.p_adjusted, n.p_raw);
    ASSERT_EQ(n.tier, significance_tier(n.p_adjusted));
    if (n.position == Direction(90, 0)) {
      EXPECT_TRUE(n.significant);
      EXPECT_EQ(n.tier, 3);
      EXPECT_EQ(n.mean_difference, 5.0);
    }
  }
}

TEST(SpatialGrid, SingleSubjectNodeIsExcluded) {
  std::vector<CueReport> reps;
  for (int s = 0; s < 4; ++s) {
    std::vector<std::pair<Direction, double>> v{{Direction(0, 0), 1.0 + s}, {Direction(90, 0), -1.0 - s}};
    if (s == 0) v.emplace_back(Direction(180, 45), 3.0);
    reps.push_back(report_with(v));
  }
  const auto g = spatial_grid_differences(reps, CueMetric::Ild);
  std::size_t tested = 0;
  for (const auto& n : g.nodes) {
    if (n.position == Direction(180, 45)) {
      EXPECT_EQ(n.status, NodeStatus::InsufficientSubjects);
      EXPECT_EQ(n.n_subjects, 1U);
      EXPECT_FALSE(n.significant);
    }
    tested += n.status == NodeStatus::Tested;
  }
  EXPECT_EQ(tested, 2U);
}

TEST(SpatialGrid, NeedsThreeSubjects) {
  std::vector<CueReport> reps(2);
  EXPECT_EQ(code_of([&] { spatial_grid_differences(reps, CueMetric::Itd); }), ErrorCode::InsufficientSubjects);
}
