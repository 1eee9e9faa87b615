#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hrtfeval/cue_metrics.hpp"
#include "hrtfeval/synth.hpp"

using namespace hrtfeval;
using namespace hrtfeval::synth;

namespace {

template <class F>
void expect_code(ErrorCode code, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

std::size_t index_of(const HrirSet& set, double az, double el) {
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (great_circle_deg(set.directions[i], Direction(az, el)) < 1e-9) return i;
  }
  ADD_FAILURE() << "no direction " << az << "/" << el;
  return 0;
}

}  // namespace

TEST(Woodworth, Examples) {
  SphereModelConfig cfg;
  EXPECT_NEAR(woodworth_itd_us(cfg, Direction(0, 0)), 0.0, 1e-9);
  EXPECT_NEAR(woodworth_itd_us(cfg, Direction(0, 90)), 0.0, 1e-9);
  // (a / c)(1 + pi / 2) 1e6 for a = 0.0875 m, c = 343 m/s
  EXPECT_NEAR(woodworth_itd_us(cfg, Direction(90, 0)), 655.8153894884939, 1e-9);
  EXPECT_NEAR(woodworth_itd_us(cfg, Direction(270, 0)), -655.8153894884939, 1e-9);
}

TEST(Woodworth, MonotoneInLateralAngleAndMirrored) {
  SphereModelConfig cfg;
  double prev = -1.0;
  for (double az = 0; az <= 90.0; az += 5.0) {
    const double v = woodworth_itd_us(cfg, Direction(az, 0));
    EXPECT_GT(v, prev);
    prev = v;
    EXPECT_NEAR(woodworth_itd_us(cfg, Direction(360.0 - az, 0)), -v, 1e-9);
    // front-back symmetric: same lateral angle
    EXPECT_NEAR(woodworth_itd_us(cfg, Direction(180.0 - az, 0)), v, 1e-9);
  }
}

TEST(SphereSet, GridAndDeterminism) {
  SphereModelConfig cfg;
  const auto a = generate_sphere_set(cfg), b = generate_sphere_set(cfg);
  EXPECT_EQ(a.size(), 4U * 24U + 2U);
  EXPECT_EQ(a.length(), 256U);
  EXPECT_EQ(a.sample_rate_hz, 48000U);
  for (std::size_t d = 0; d < a.size(); ++d) {
    EXPECT_EQ(a.impulses[d].left, b.impulses[d].left);
    EXPECT_EQ(a.impulses[d].right, b.impulses[d].right);
  }
  cfg.noise_seed = 5;
  const auto c = generate_sphere_set(cfg), e = generate_sphere_set(cfg);
  EXPECT_EQ(c.impulses[3].left, e.impulses[3].left);
  EXPECT_NE(c.impulses[3].left, a.impulses[3].left);
}

TEST(SphereSet, FrontalEarsIdenticalAndSidesMirrored) {
  SphereModelConfig cfg;
  cfg.gain_law = GainLaw::CosineShadow;
  const auto s = generate_sphere_set(cfg);
  const auto front = index_of(s, 0, 0);
  EXPECT_EQ(s.impulses[front].left, s.impulses[front].right);
  for (double el : {-30.0, 0.0, 30.0, 60.0}) {
    for (double az = 15; az < 180; az += 15) {
      const auto l = index_of(s, az, el), r = index_of(s, 360 - az, el);
      EXPECT_EQ(s.impulses[l].left, s.impulses[r].right) << az << " " << el;
      EXPECT_EQ(s.impulses[l].right, s.impulses[r].left) << az << " " << el;
    }
  }
  // left source: left ear louder and earlier
  const auto left = index_of(s, 90, 0);
  MetricConfig mc;
  EXPECT_LT(ild_db(s, left, mc), 0.0);
  EXPECT_GT(estimate_itd(s, left, mc), 0.0);
}

TEST(SphereSet, EstimatedItdTracksWoodworth) {
  SphereModelConfig cfg;
  cfg.grid.azimuth_step_deg = 10.0;
  cfg.grid.elevations_deg = {-45, -20, 0, 20, 45, 70};
  const auto s = generate_sphere_set(cfg);
  ASSERT_GE(s.size(), 64U);
  MetricConfig mc;
  const double period_us = 1e6 / 48000.0;
  for (std::size_t d = 0; d < s.size(); ++d) {
    const double ref = woodworth_itd_us(cfg, s.directions[d]);
    const double est = estimate_itd(s, d, mc);
    EXPECT_LE(std::fabs(est - ref), period_us + 0.05 * std::fabs(ref)) << d;
    // the synthetic pulses place the onset on whole samples
    EXPECT_LE(std::fabs(est - ref), 0.5 * period_us + 1e-9) << d;
  }
}

TEST(SphereSet, Errors) {
  SphereModelConfig cfg;
  cfg.impulse_length = 40;
  expect_code(ErrorCode::DelayExceedsLength, [&] { generate_sphere_set(cfg); });
  cfg = {};
  cfg.head_radius_m = 0;
  expect_code(ErrorCode::InvalidConfig, [&] { generate_sphere_set(cfg); });
  cfg = {};
  cfg.grid.elevations_deg.clear();
  cfg.grid.include_poles = false;
  expect_code(ErrorCode::InvalidConfig, [&] { generate_sphere_set(cfg); });
  cfg = {};
  cfg.grid.azimuth_step_deg = 0;
  expect_code(ErrorCode::InvalidConfig, [&] { generate_sphere_set(cfg); });
}

TEST(Perturb, RightEarGainForcesIldAndLsd) {
  SphereModelConfig cfg;
  cfg.gain_law = GainLaw::CosineShadow;
  const auto ref = generate_sphere_set(cfg);
  Perturbation p;
  p.ear = EarSelect::Right;
  p.gain_db = 6.0206;
  const auto out = perturb_set(ref, std::vector<Perturbation>{p}, 1);
  const auto rep = compare_sets(out.set, ref, MetricConfig{});
  ASSERT_EQ(rep.records.size(), ref.size());
  for (std::size_t i = 0; i < rep.records.size(); ++i) {
    const auto& r = rep.records[i];
    EXPECT_NEAR(r.ild_signed_db, 6.0206, 1e-6);
    EXPECT_NEAR(r.ild_abs_err_db, 6.0206, 1e-6);
    EXPECT_NEAR(r.lsd_right_db, 6.0206, 1e-6);
    EXPECT_NEAR(r.lsd_left_db, 0.0, 1e-12);
    EXPECT_EQ(r.itd_abs_err_us, 0.0);
    EXPECT_EQ(out.records[i].ild_delta_db(), 6.0206);
  }
}

TEST(Perturb, RightDelayShiftsItd) {
  const auto ref = generate_sphere_set(SphereModelConfig{});
  Perturbation p;
  p.ear = EarSelect::Right;
  p.delay_samples = 2;
  const auto out = perturb_set(ref, std::vector<Perturbation>{p}, 1);
  const auto rep = compare_sets(out.set, ref, MetricConfig{});
  // ITD is right onset minus left onset, so a later right ear raises it by 2 / 48000 s
  for (const auto& r : rep.records) EXPECT_NEAR(r.itd_signed_us(), 41.666666666666664, 1e-6);
  EXPECT_EQ(out.records[0].itd_delta_samples(), 2.0);
  EXPECT_NEAR(out.records[0].itd_delta_samples() / 48000.0 * 1e6, 41.67, 0.005);
}

TEST(Perturb, BandBoostOnlyTouchesImpliedBins) {
  const auto ref = generate_sphere_set(SphereModelConfig{});
  Perturbation p;
  p.band_hz = std::pair{8000.0, 10000.0};
  p.band_gain_db = 4.0;
  const auto out = perturb_set(ref, std::vector<Perturbation>{p}, 1);
  // 256 samples at 48 kHz: 187.5 Hz bins, 8 kHz..10 kHz -> bins 43..53
  ASSERT_EQ(out.band_bins.size(), 11U);
  EXPECT_EQ(out.band_bins.front(), 43U);
  EXPECT_EQ(out.band_bins.back(), 53U);
  const std::vector<HrirSet> cands{out.set}, refs{ref};
  const auto curve = lsd_frequency_curve(cands, refs, MetricConfig{});
  ASSERT_EQ(curve.mean_db.size(), 129U);
  for (std::size_t k = 0; k < curve.mean_db.size(); ++k) {
    const bool in_band = k >= 43 && k <= 53;
    if (in_band) {
      EXPECT_NEAR(curve.mean_db[k], 4.0, 1e-9) << k;
    } else {
      EXPECT_NEAR(curve.mean_db[k], 0.0, 1e-9) << k;
    }
  }
}

TEST(Perturb, SelectionJitterAndAccumulation) {
  const auto ref = generate_sphere_set(SphereModelConfig{});
  Perturbation a;
  a.ear = EarSelect::Left;
  a.gain_db = -3.0;
  a.directions = {0, 5};
  Perturbation b;
  b.gain_db = 1.0;
  b.delay_samples = -1;
  b.directions = {5};
  const auto out = perturb_set(ref, std::vector<Perturbation>{a, b}, 2);
  EXPECT_EQ(out.records[0].gain_left_db, -3.0);
  EXPECT_EQ(out.records[0].gain_right_db, 0.0);
  EXPECT_EQ(out.records[5].gain_left_db, -2.0);
  EXPECT_EQ(out.records[5].gain_right_db, 1.0);
  EXPECT_EQ(out.records[5].delay_left, -1);
  EXPECT_EQ(out.records[5].delay_right, -1);
  EXPECT_EQ(out.records[1].gain_left_db, 0.0);
  EXPECT_EQ(out.set.impulses[1].left, ref.impulses[1].left);
  EXPECT_TRUE(out.band_bins.empty());

  // jitter streams do not depend on which directions are selected
  Perturbation j;
  j.gain_jitter_db = 2.0;
  auto only = j;
  only.directions = {7};
  const auto all = perturb_set(ref, std::vector<Perturbation>{j}, 9);
  const auto one = perturb_set(ref, std::vector<Perturbation>{only}, 9);
  EXPECT_EQ(all.records[7].gain_left_db, one.records[7].gain_left_db);
  EXPECT_EQ(all.records[7].gain_right_db, one.records[7].gain_right_db);
  EXPECT_NE(all.records[7].gain_left_db, 0.0);
  EXPECT_EQ(one.records[6].gain_left_db, 0.0);
  const auto again = perturb_set(ref, std::vector<Perturbation>{j}, 9);
  EXPECT_EQ(again.records[20].gain_right_db, all.records[20].gain_right_db);

  // bookkeeping predicts the measured ILD change; epsilon against a mean
  // energy of 1/256 accounts for the residual
  const auto rep = compare_sets(all.set, ref, MetricConfig{});
  for (std::size_t i = 0; i < rep.records.size(); ++i) {
    EXPECT_NEAR(rep.records[i].ild_signed_db, all.records[i].ild_delta_db(), 1e-6);
  }
}

TEST(Perturb, Errors) {
  const auto ref = generate_sphere_set(SphereModelConfig{});
  auto bad = [&](Perturbation p) { perturb_set(ref, std::vector<Perturbation>{p}, 1); };
  Perturbation p;
  p.gain_db = 61;
  expect_code(ErrorCode::SpecOutOfRange, [&] { bad(p); });
  p = {};
  p.delay_samples = 256;
  expect_code(ErrorCode::SpecOutOfRange, [&] { bad(p); });
  p = {};
  p.band_hz = std::pair{5000.0, 30000.0};
  expect_code(ErrorCode::SpecOutOfRange, [&] { bad(p); });
  p = {};
  p.directions = {ref.size()};
  expect_code(ErrorCode::SpecOutOfRange, [&] { bad(p); });
  p = {};
  p.gain_jitter_db = -1;
  expect_code(ErrorCode::SpecOutOfRange, [&] { bad(p); });
}

TEST(SphereSet, SourceItdSurvivesItdRemoval) {
  SphereModelConfig cfg;
  cfg.gain_law = GainLaw::CosineShadow;
  cfg.noise_seed = 12;
  const auto s = generate_sphere_set(cfg);
  const auto flat = remove_itd(s, PreprocessConfig{});
  MetricConfig mc;
  const double sample_us = 1e6 / 48000.0;
  for (std::size_t d = 0; d < s.size(); ++d) {
    EXPECT_LE(std::fabs(estimate_itd(flat, d, mc)), sample_us + 1e-9) << d;
    EXPECT_NEAR(source_itd_us(flat, d, mc), estimate_itd(s, d, mc), 1e-9) << d;
    EXPECT_EQ(source_itd_us(s, d, mc), estimate_itd(s, d, mc));
  }
  const auto rep = compare_sets(flat, s, mc);
  for (const auto& r : rep.records) EXPECT_LT(r.itd_abs_err_us, 1e-9);
}
