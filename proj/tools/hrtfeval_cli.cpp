// hrtfeval command-line driver: synth, preprocess, compare, behave.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hrtfeval/behavioral.hpp"
#include "hrtfeval/cluster.hpp"
#include "hrtfeval/cue_metrics.hpp"
#include "hrtfeval/io.hpp"
#include "hrtfeval/preprocess.hpp"
#include "hrtfeval/report.hpp"
#include "hrtfeval/synth.hpp"
#ifdef HRTFEVAL_HAS_SOFA
#include "hrtfeval/sofa.hpp"
#endif

#ifndef HRTFEVAL_VERSION
#define HRTFEVAL_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hrtfeval;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitInternal = 3;

// ---------------------------------------------------------------------------
// Shared plumbing

struct Common {
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  bool quiet = false;
  std::string log_path;
};

class Log {
 public:
  explicit Log(const Common& c) : quiet_(c.quiet) {
    if (!c.log_path.empty()) file_.open(c.log_path, std::ios::app);
  }
  void operator()(const std::string& msg) {
    std::lock_guard lock(mu_);
    if (!quiet_) std::cerr << msg << '\n';
    if (file_) file_ << msg << '\n' << std::flush;
  }

 private:
  bool quiet_;
  std::ofstream file_;
  std::mutex mu_;
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Errors are kept per
/// index; callers decide whether to rethrow or collect them.
std::vector<std::exception_ptr> parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return errors;
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Output files of one command plus timings; becomes run_record.json.
class Run {
 public:
  Run(std::string command, fs::path dir, const Common& common, std::vector<std::string> argv)
      : command_(std::move(command)), dir_(std::move(dir)), common_(common), argv_(std::move(argv)) {
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }

  void write(const std::string& rel, const std::string& content) {
    io::write_file(dir_ / rel, content);
    std::lock_guard lock(mu_);
    outputs_.insert(rel);
  }

  template <typename F>
  auto stage(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Stop {
      Run* run;
      std::string name;
      std::chrono::steady_clock::time_point t0;
      ~Stop() {
        const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        run->timings_.push_back({name, ms});
      }
    } stop{this, name, t0};
    return f();
  }

  void error(const std::string& msg) { errors_.push_back(msg); }

  json config;
  std::optional<fs::path> manifest;
  std::uint64_t seed = 1;

  void finish() const {
    json r;
    r["tool"] = "hrtfeval";
    r["version"] = HRTFEVAL_VERSION;
    r["command"] = command_;
    r["argv"] = argv_;
    r["manifest"] = manifest ? json(fs::absolute(*manifest).lexically_normal().string()) : json(nullptr);
    r["seed"] = seed;
    r["jobs"] = common_.jobs;
    r["config"] = config;
    json t = json::array();
    for (const auto& [name, ms] : timings_) t.push_back({{"stage", name}, {"ms", ms}});
    r["timings"] = t;
    json outs = json::array();
    for (const auto& rel : outputs_) {
      const auto p = dir_ / rel;
      outs.push_back({{"path", rel}, {"bytes", fs::file_size(p)}, {"sha256", report::sha256_file(p)}});
    }
    r["outputs"] = outs;
    r["errors"] = errors_;
    io::write_file(dir_ / "run_record.json", r.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path dir_;
  const Common& common_;
  std::vector<std::string> argv_;
  std::set<std::string> outputs_;
  std::vector<std::pair<std::string, double>> timings_;
  std::vector<std::string> errors_;
  std::mutex mu_;
};

/// --out (or HRTFEVAL_OUT, handled by CLI11) wins; then the manifest's
/// output_dir relative to the manifest; then ./out.
fs::path output_root(const Common& c, const io::Manifest* m) {
  if (!c.out.empty()) return c.out;
  if (m) return (m->base_dir / m->options.output_dir).lexically_normal();
  return "out";
}

std::pair<double, double> parse_band(const std::string& s) {
  const auto colon = s.find(':');
  double lo = 0, hi = 0;
  if (colon == std::string::npos || !io::parse_number(s.substr(0, colon), lo) || !io::parse_number(s.substr(colon + 1), hi) ||
      !(lo >= 0.0 && lo < hi)) {
    throw Error(ErrorCode::InvalidConfig, "--band expects lo:hi in Hz with 0 <= lo < hi, got '" + s + "'");
  }
  return {lo, hi};
}

HrirSet load_set(const fs::path& p) {
#ifdef HRTFEVAL_HAS_SOFA
  if (p.extension() == ".sofa") return sofa::import_sofa(p);
#endif
  return io::read_bundle(p);
}

std::string num(double v) { return io::format_number(v); }
std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : ""; }

void stat_row(report::Csv& csv, const std::string& metric, const std::string& scope, const std::string& a,
              const std::string& b, const stats::StatResult& r, const std::string& route) {
  csv.row() << metric << scope << a << b << r.test << r.statistic << opt_num(r.df1) << opt_num(r.df2) << r.p
            << opt_num(r.p_adjusted) << r.correction << r.n << route << r.note;
}

report::Csv stats_table() {
  return report::Csv{"metric", "scope", "a", "b", "test", "statistic", "df1", "df2", "p", "p_adjusted", "correction", "n", "route", "note"};
}

bool is_statistical(ErrorCode c) {
  switch (c) {
    case ErrorCode::EmptyInput:
    case ErrorCode::OutOfRangeN:
    case ErrorCode::ZeroVariance:
    case ErrorCode::AllZeroDifferences:
    case ErrorCode::DegenerateShape:
    case ErrorCode::ConstantInput:
    case ErrorCode::InsufficientSubjects:
      return true;
    default:
      return false;
  }
}

/// Omnibus and post-hoc rows for one metric. A statistic that cannot be
/// computed on this data becomes a row saying so; it is not a run failure.
void comparison_rows(report::Csv& csv, const std::string& metric, const std::function<stats::ConditionComparison()>& run) {
  try {
    const auto c = run();
    const std::string route = c.route == stats::TestRoute::Parametric ? "parametric" : "nonparametric";
    auto omni = c.omnibus;
    std::string trail;
    for (const auto& t : c.trail) trail += (trail.empty() ? "" : "; ") + t;
    omni.note = omni.note.empty() ? trail : omni.note + "; " + trail;
    stat_row(csv, metric, "omnibus", "", "", omni, route);
    for (const auto& p : c.pairwise) stat_row(csv, metric, "pairwise", c.conditions[p.a], c.conditions[p.b], p.result, route);
  } catch (const Error& e) {
    if (!is_statistical(e.code())) throw;
    csv.row() << metric << "omnibus" << "" << "" << "not_computed" << "" << "" << "" << "" << "" << "" << 0 << "" << e.what();
  }
}

// ---------------------------------------------------------------------------
// synth

struct ResponseModel {
  double sd_deg = 6.0;
  double front_back_rate = 0.03;
};

struct SynthCondition {
  std::string name;
  std::vector<synth::Perturbation> perturbations;
  ResponseModel response;
};

struct SynthConfig {
  std::size_t subjects = 4;
  std::uint64_t seed = 1;
  synth::SphereModelConfig sphere;
  double head_radius_spread_m = 0.004;
  std::string reference_condition = "measured";
  ResponseModel reference_response{};
  std::vector<SynthCondition> conditions;
  double response_azimuth_step_deg = 30.0;
  std::vector<double> response_elevations_deg{-20.0, 0.0, 20.0, 40.0};
  std::size_t repetitions = 2;
};

SynthConfig default_synth_config() {
  SynthConfig c;
  c.sphere.gain_law = synth::GainLaw::CosineShadow;
  synth::Perturbation jitter;
  jitter.gain_jitter_db = 1.0;
  synth::Perturbation boost;
  boost.band_hz = std::pair{6000.0, 9000.0};
  boost.band_gain_db = 3.0;
  c.conditions.push_back({"pr", {jitter, boost}, {9.0, 0.08}});
  synth::Perturbation wide;
  wide.gain_jitter_db = 3.0;
  synth::Perturbation late;
  late.ear = synth::EarSelect::Right;
  late.delay_samples = 2;
  synth::Perturbation notch;
  notch.band_hz = std::pair{4000.0, 12000.0};
  notch.band_gain_db = -6.0;
  c.conditions.push_back({"random", {wide, late, notch}, {14.0, 0.2}});
  return c;
}

synth::Perturbation perturbation_from_json(const json& j) {
  synth::Perturbation p;
  const auto ear = j.value("ear", std::string("both"));
  if (ear == "both") {
    p.ear = synth::EarSelect::Both;
  } else if (ear == "left") {
    p.ear = synth::EarSelect::Left;
  } else if (ear == "right") {
    p.ear = synth::EarSelect::Right;
  } else {
    throw Error(ErrorCode::InvalidConfig, "perturbation ear must be both, left or right");
  }
  p.gain_db = j.value("gain_db", 0.0);
  p.gain_jitter_db = j.value("gain_jitter_db", 0.0);
  if (j.contains("band_hz")) {
    const auto& b = j["band_hz"];
    if (!b.is_array() || b.size() != 2) throw Error(ErrorCode::InvalidConfig, "band_hz must be [lo, hi]");
    p.band_hz = std::pair{b[0].get<double>(), b[1].get<double>()};
  }
  p.band_gain_db = j.value("band_gain_db", 0.0);
  p.delay_samples = j.value("delay_samples", 0);
  p.directions = j.value("directions", std::vector<std::size_t>{});
  return p;
}

json perturbation_to_json(const synth::Perturbation& p) {
  json j;
  j["ear"] = p.ear == synth::EarSelect::Both ? "both" : p.ear == synth::EarSelect::Left ? "left" : "right";
  j["gain_db"] = p.gain_db;
  j["gain_jitter_db"] = p.gain_jitter_db;
  j["band_hz"] = p.band_hz ? json::array({p.band_hz->first, p.band_hz->second}) : json(nullptr);
  j["band_gain_db"] = p.band_gain_db;
  j["delay_samples"] = p.delay_samples;
  j["directions"] = p.directions;
  return j;
}

ResponseModel response_from_json(const json& j, ResponseModel r) {
  r.sd_deg = j.value("sd_deg", r.sd_deg);
  r.front_back_rate = j.value("front_back_rate", r.front_back_rate);
  if (!(r.sd_deg >= 0.0) || !(r.front_back_rate >= 0.0 && r.front_back_rate <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "response sd_deg must be >= 0 and front_back_rate within [0, 1]");
  }
  return r;
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c = default_synth_config();
  try {
    c.subjects = j.value("subjects", c.subjects);
    c.seed = j.value("seed", c.seed);
    c.head_radius_spread_m = j.value("head_radius_spread_m", c.head_radius_spread_m);
    c.reference_condition = j.value("reference_condition", c.reference_condition);
    if (j.contains("sphere")) {
      const auto& s = j["sphere"];
      auto& m = c.sphere;
      m.head_radius_m = s.value("head_radius_m", m.head_radius_m);
      m.speed_of_sound_m_s = s.value("speed_of_sound_m_s", m.speed_of_sound_m_s);
      m.sample_rate_hz = s.value("sample_rate_hz", m.sample_rate_hz);
      m.impulse_length = s.value("impulse_length", m.impulse_length);
      m.base_delay_samples = s.value("base_delay_samples", m.base_delay_samples);
      m.grid.azimuth_step_deg = s.value("azimuth_step_deg", m.grid.azimuth_step_deg);
      m.grid.elevations_deg = s.value("elevations_deg", m.grid.elevations_deg);
      m.grid.include_poles = s.value("include_poles", m.grid.include_poles);
      const auto law = s.value("gain_law", std::string(m.gain_law == synth::GainLaw::Unity ? "unity" : "cosine_shadow"));
      if (law != "unity" && law != "cosine_shadow") throw Error(ErrorCode::InvalidConfig, "gain_law must be unity or cosine_shadow");
      m.gain_law = law == "unity" ? synth::GainLaw::Unity : synth::GainLaw::CosineShadow;
      m.shadow_depth = s.value("shadow_depth", m.shadow_depth);
      m.noise_level = s.value("noise_level", m.noise_level);
    }
    if (j.contains("reference_response")) c.reference_response = response_from_json(j["reference_response"], c.reference_response);
    if (j.contains("conditions")) {
      c.conditions.clear();
      for (const auto& cj : j["conditions"]) {
        SynthCondition sc;
        sc.name = cj.at("name").get<std::string>();
        for (const auto& pj : cj.value("perturbations", json::array())) sc.perturbations.push_back(perturbation_from_json(pj));
        sc.response = response_from_json(cj.value("response", json::object()), ResponseModel{});
        c.conditions.push_back(std::move(sc));
      }
    }
    if (j.contains("responses")) {
      const auto& r = j["responses"];
      c.response_azimuth_step_deg = r.value("azimuth_step_deg", c.response_azimuth_step_deg);
      c.response_elevations_deg = r.value("elevations_deg", c.response_elevations_deg);
      c.repetitions = r.value("repetitions", c.repetitions);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("synth config: ") + e.what());
  }
  if (c.subjects < 1 || c.subjects > 999) throw Error(ErrorCode::InvalidConfig, "subjects must lie in [1, 999]");
  std::set<std::string> names{c.reference_condition};
  for (const auto& sc : c.conditions) {
    if (sc.name.empty() || sc.name.find_first_of(",/\\\n") != std::string::npos || !names.insert(sc.name).second) {
      throw Error(ErrorCode::InvalidConfig, "condition name '" + sc.name + "' is empty, repeated or not path-safe");
    }
  }
  if (!(c.response_azimuth_step_deg > 0.0) || c.repetitions < 1) {
    throw Error(ErrorCode::InvalidConfig, "response grid needs a positive azimuth step and >= 1 repetition");
  }
  return c;
}

json synth_config_to_json(const SynthConfig& c) {
  json j;
  j["subjects"] = c.subjects;
  j["seed"] = c.seed;
  j["head_radius_spread_m"] = c.head_radius_spread_m;
  j["reference_condition"] = c.reference_condition;
  const auto& m = c.sphere;
  j["sphere"] = {{"head_radius_m", m.head_radius_m},
                 {"speed_of_sound_m_s", m.speed_of_sound_m_s},
                 {"sample_rate_hz", m.sample_rate_hz},
                 {"impulse_length", m.impulse_length},
                 {"base_delay_samples", m.base_delay_samples},
                 {"azimuth_step_deg", m.grid.azimuth_step_deg},
                 {"elevations_deg", m.grid.elevations_deg},
                 {"include_poles", m.grid.include_poles},
                 {"gain_law", m.gain_law == synth::GainLaw::Unity ? "unity" : "cosine_shadow"},
                 {"shadow_depth", m.shadow_depth},
                 {"noise_level", m.noise_level}};
  j["reference_response"] = {{"sd_deg", c.reference_response.sd_deg}, {"front_back_rate", c.reference_response.front_back_rate}};
  j["conditions"] = json::array();
  for (const auto& sc : c.conditions) {
    json cj;
    cj["name"] = sc.name;
    cj["perturbations"] = json::array();
    for (const auto& p : sc.perturbations) cj["perturbations"].push_back(perturbation_to_json(p));
    cj["response"] = {{"sd_deg", sc.response.sd_deg}, {"front_back_rate", sc.response.front_back_rate}};
    j["conditions"].push_back(cj);
  }
  j["responses"] = {{"azimuth_step_deg", c.response_azimuth_step_deg},
                    {"elevations_deg", c.response_elevations_deg},
                    {"repetitions", c.repetitions}};
  return j;
}

std::string subject_name(std::size_t i) {
  std::string s = std::to_string(i + 1);
  return "S" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

/// Simulated pointing: optional front-back reversal, then Gaussian scatter of
/// sd/2 in lateral angle and sd in polar angle.
Direction simulated_response(const Direction& target, const ResponseModel& m, SplitMix64& g) {
  const bool reverse = g.uniform() < m.front_back_rate;
  auto lp = to_lateral_polar(reverse ? mirror_front_back(target) : target);
  lp.lateral_deg = std::clamp(lp.lateral_deg + 0.5 * m.sd_deg * g.normal(), -89.0, 89.0);
  lp.polar_deg += m.sd_deg * g.normal();
  const auto d = from_lateral_polar(lp);
  return Direction(d.azimuth_deg(), d.elevation_deg());
}

int cmd_synth(const Common& common, const std::string& config_path, std::optional<std::size_t> subjects,
              const std::vector<std::string>& argv) {
  SynthConfig cfg = config_path.empty() ? default_synth_config() : synth_config_from_json([&] {
    try {
      return json::parse(io::read_file(config_path));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::InvalidConfig, "'" + config_path + "' is not valid JSON: " + e.what());
    }
  }());
  if (subjects) cfg.subjects = *subjects;
  if (common.seed) cfg.seed = *common.seed;
  if (cfg.subjects < 1) throw Error(ErrorCode::InvalidConfig, "--subjects must be >= 1");

  Log log(common);
  Run run("synth", output_root(common, nullptr) / "synth", common, argv);
  run.seed = cfg.seed;
  run.config = synth_config_to_json(cfg);
  if (!config_path.empty()) run.config["source"] = fs::absolute(config_path).lexically_normal().string();

  const std::size_t nc = cfg.conditions.size();
  std::vector<std::vector<synth::PerturbedSet>> perturbed(cfg.subjects);
  std::vector<HrirSet> measured(cfg.subjects);
  run.stage("generate", [&] {
    rethrow_first(parallel_for(cfg.subjects, common.jobs, [&](std::size_t s) {
      auto sphere = cfg.sphere;
      sphere.head_radius_m += cfg.head_radius_spread_m * (static_cast<double>(s) - (cfg.subjects - 1) / 2.0);
      sphere.noise_seed = SplitMix64::stream(cfg.seed, s)();
      sphere.subject_id = subject_name(s);
      sphere.label = cfg.reference_condition;
      measured[s] = synth::generate_sphere_set(sphere);
      for (std::size_t c = 0; c < nc; ++c) {
        auto p = synth::perturb_set(measured[s], cfg.conditions[c].perturbations,
                                    SplitMix64::stream(cfg.seed, 1000 + s * 64 + c)());
        p.set.label = cfg.conditions[c].name;
        perturbed[s].push_back(std::move(p));
      }
    }));
  });

  io::Manifest manifest;
  manifest.base_dir = run.dir();
  manifest.reference_condition = cfg.reference_condition;
  manifest.responses = run.dir() / "responses.csv";
  run.stage("write_bundles", [&] {
    for (std::size_t s = 0; s < cfg.subjects; ++s) {
      const auto id = subject_name(s);
      io::SubjectEntry e;
      e.id = id;
      const std::string ref_rel = id + "/" + cfg.reference_condition + ".hrirb";
      run.write(ref_rel, io::encode_bundle(measured[s]));
      e.reference = run.dir() / ref_rel;
      for (std::size_t c = 0; c < nc; ++c) {
        const std::string rel = id + "/" + cfg.conditions[c].name + ".hrirb";
        run.write(rel, io::encode_bundle(perturbed[s][c].set));
        e.conditions.push_back({cfg.conditions[c].name, run.dir() / rel});
      }
      manifest.subjects.push_back(std::move(e));
    }
  });

  run.stage("bookkeeping", [&] {
    report::Csv csv{"subject", "condition", "direction", "azimuth_deg", "elevation_deg", "gain_left_db", "gain_right_db",
                    "delay_left", "delay_right", "ild_delta_db", "itd_delta_us"};
    for (std::size_t s = 0; s < cfg.subjects; ++s) {
      for (std::size_t c = 0; c < nc; ++c) {
        const auto& p = perturbed[s][c];
        for (std::size_t d = 0; d < p.records.size(); ++d) {
          const auto& r = p.records[d];
          csv.row() << subject_name(s) << cfg.conditions[c].name << d << p.set.directions[d].azimuth_deg()
                    << p.set.directions[d].elevation_deg() << r.gain_left_db << r.gain_right_db << r.delay_left
                    << r.delay_right << r.ild_delta_db()
                    << r.itd_delta_samples() / static_cast<double>(p.set.sample_rate_hz) * 1e6;
        }
      }
    }
    run.write("perturbations.csv", csv.str());
  });

  run.stage("responses", [&] {
    std::vector<Direction> locations;
    for (double el : cfg.response_elevations_deg) {
      for (double az = 0.0; az < 360.0 - 1e-9; az += cfg.response_azimuth_step_deg) locations.emplace_back(az, el);
    }
    std::vector<std::pair<std::string, ResponseModel>> conds{{cfg.reference_condition, cfg.reference_response}};
    for (const auto& c : cfg.conditions) conds.emplace_back(c.name, c.response);
    ResponseLog rl;
    for (std::size_t s = 0; s < cfg.subjects; ++s) {
      for (std::size_t c = 0; c < conds.size(); ++c) {
        auto g = SplitMix64::stream(cfg.seed, 100000 + s * 64 + c);
        long index = 1;
        for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
          for (const auto& target : locations) {
            rl.trials.push_back({subject_name(s), conds[c].first, index++, target, simulated_response(target, conds[c].second, g)});
          }
        }
      }
    }
    run.write("responses.csv", io::encode_response_log(rl));
  });

  run.write("manifest.json", io::encode_manifest(manifest, run.dir()));
  run.finish();
  log("synth: " + std::to_string(cfg.subjects) + " subjects x " + std::to_string(nc + 1) + " conditions -> " +
      run.dir().string());
  return 0;
}

// ---------------------------------------------------------------------------
// preprocess

PreprocessConfig preprocess_config(const io::AnalysisOptions& o) {
  PreprocessConfig p;
  p.fade_in_samples = o.fade_in_samples;
  p.fade_out_samples = o.fade_out_samples;
  p.itd_padding_ms = o.itd_padding_ms;
  p.match_tolerance_deg = o.match_tolerance_deg;
  p.onset = o.metric;
  return p;
}

/// Same chain as preprocess_pipeline, with the frontal level taken from a
/// separate set when the manifest names one.
HrirSet run_chain(const HrirSet& set, const HrirSet& grid_ref, const HrirSet& level_ref, PreprocessConfig cfg) {
  if (&grid_ref == &level_ref) return preprocess_pipeline(set, grid_ref, cfg);
  if (set.sample_rate_hz != grid_ref.sample_rate_hz || level_ref.sample_rate_hz != grid_ref.sample_rate_hz) {
    throw Error(ErrorCode::SampleRateMismatch, "set '" + set.label + "' and its references differ in sample rate");
  }
  if (cfg.target_length == 0) cfg.target_length = grid_ref.length();
  const double level = frontal_mean_rms(level_ref, cfg.frontal_direction, cfg.match_tolerance_deg);
  if (!(level > 0.0)) throw Error(ErrorCode::ZeroFrontalEnergy, "level reference frontal impulses are all zero");
  auto windowed = window_hrirs(align_to_reference(set, grid_ref, cfg.match_tolerance_deg), cfg);
  return remove_itd(normalise_level(windowed, cfg, level).first, cfg);
}

int cmd_preprocess(const Common& common, const std::string& manifest_path, const std::vector<std::string>& argv) {
  const auto manifest = io::read_manifest(manifest_path);
  manifest.require_inputs_exist();
  Log log(common);
  Run run("preprocess", output_root(common, &manifest) / "preprocess", common, argv);
  run.manifest = manifest_path;
  run.seed = common.seed.value_or(manifest.options.seed);
  run.config = io::options_to_json(manifest.options);
  const auto cfg = preprocess_config(manifest.options);

  std::optional<HrirSet> level_ref;
  if (manifest.level_reference) level_ref = load_set(*manifest.level_reference);

  // one task per subject; every task writes only below its own subject directory
  const std::size_t ns = manifest.subjects.size();
  io::Manifest out = manifest;
  out.base_dir = run.dir();
  const auto errors = run.stage("pipeline", [&] {
    return parallel_for(ns, common.jobs, [&](std::size_t s) {
      const auto& subj = manifest.subjects[s];
      const HrirSet ref = load_set(subj.reference);
      const HrirSet& lref = level_ref ? *level_ref : ref;
      auto process = [&](const HrirSet& in, const std::string& name) {
        HrirSet p = run_chain(in, ref, lref, cfg);
        p.subject_id = subj.id;
        p.label = name;
        const std::string rel = subj.id + "/" + name + ".hrirb";
        run.write(rel, io::encode_bundle(p));
        return run.dir() / rel;
      };
      out.subjects[s].reference = process(ref, manifest.reference_condition);
      for (std::size_t c = 0; c < subj.conditions.size(); ++c) {
        out.subjects[s].conditions[c].path = process(load_set(subj.conditions[c].path), subj.conditions[c].name);
      }
    });
  });
  int code = 0;
  for (std::size_t s = 0; s < ns; ++s) {
    if (!errors[s]) continue;
    try {
      std::rethrow_exception(errors[s]);
    } catch (const Error& e) {
      run.error(manifest.subjects[s].id + ": " + e.what());
      log("error: " + manifest.subjects[s].id + ": " + e.what());
      code = std::max(code, e.is_internal() ? kExitInternal : kExitInput);
    } catch (const std::exception& e) {
      run.error(manifest.subjects[s].id + ": " + e.what());
      log("internal error: " + manifest.subjects[s].id + ": " + e.what());
      code = kExitInternal;
    }
  }
  if (code == 0) run.write("manifest.json", io::encode_manifest(out, run.dir()));
  run.finish();
  log("preprocess: " + std::to_string(ns) + " subjects -> " + run.dir().string());
  return code;
}

// ---------------------------------------------------------------------------
// compare

int cmd_compare(const Common& common, const std::string& manifest_path, std::optional<double> grid_step,
                std::optional<std::size_t> n_perm, const std::string& band, const std::vector<std::string>& argv) {
  auto manifest = io::read_manifest(manifest_path);
  auto& opt = manifest.options;
  if (grid_step) opt.grid_step_deg = *grid_step;
  if (n_perm) opt.n_permutations = *n_perm;
  if (!band.empty()) opt.metric.freq_band_hz = parse_band(band);
  if (common.seed) opt.seed = *common.seed;
  opt.metric.validate();
  manifest.require_inputs_exist();

  Log log(common);
  Run run("compare", output_root(common, &manifest) / "compare", common, argv);
  run.manifest = manifest_path;
  run.seed = opt.seed;
  run.config = io::options_to_json(opt);

  const auto conditions = manifest.condition_names();
  const std::size_t ns = manifest.subjects.size(), nc = conditions.size();
  std::vector<HrirSet> refs(ns);
  std::vector<std::vector<HrirSet>> cands(ns, std::vector<HrirSet>(nc));
  run.stage("load", [&] {
    rethrow_first(parallel_for(ns * (nc + 1), common.jobs, [&](std::size_t i) {
      const std::size_t s = i / (nc + 1), c = i % (nc + 1);
      if (c == 0) {
        refs[s] = load_set(manifest.subjects[s].reference);
      } else {
        cands[s][c - 1] = load_set(manifest.subjects[s].conditions[c - 1].path);
      }
    }));
  });

  // per (subject, condition) cue reports, plus the LSD over the correlation band
  std::vector<CueReport> reports(ns * nc);
  std::vector<double> lsd_corr(ns * nc);
  run.stage("cues", [&] {
    rethrow_first(parallel_for(ns * nc, common.jobs, [&](std::size_t i) {
      const std::size_t s = i / nc, c = i % nc;
      reports[i] = compare_sets(cands[s][c], refs[s], opt.metric, opt.match_tolerance_deg);
      reports[i].subject_id = manifest.subjects[s].id;
      reports[i].condition = conditions[c];
      MetricConfig band_cfg = opt.metric;
      band_cfg.freq_band_hz = opt.correlation_band_hz;
      lsd_corr[i] = compare_sets(cands[s][c], refs[s], band_cfg, opt.match_tolerance_deg).mean_lsd_db;
    }));
  });

  run.stage("cue_tables", [&] {
    report::Csv per_dir{"subject", "condition", "azimuth_deg", "elevation_deg", "itd_cand_us", "itd_ref_us", "itd_abs_err_us",
                        "ild_cand_db", "ild_ref_db", "ild_abs_err_db", "ild_signed_db", "lsd_left_db", "lsd_right_db",
                        "lsd_signed_mean_db"};
    report::Csv per_subject{"subject", "condition", "mean_abs_itd_us", "mean_abs_ild_db", "mean_lsd_db"};
    report::Csv lsd_table{"subject", "condition", "lsd_db"};
    for (const auto& rep : reports) {
      for (const auto& r : rep.records) {
        per_dir.row() << rep.subject_id << rep.condition << r.direction.azimuth_deg() << r.direction.elevation_deg()
                      << r.itd_cand_us << r.itd_ref_us << r.itd_abs_err_us << r.ild_cand_db << r.ild_ref_db
                      << r.ild_abs_err_db << r.ild_signed_db << r.lsd_left_db << r.lsd_right_db << r.lsd_signed_mean_db;
      }
      per_subject.row() << rep.subject_id << rep.condition << rep.mean_abs_itd_us << rep.mean_abs_ild_db << rep.mean_lsd_db;
    }
    for (std::size_t i = 0; i < reports.size(); ++i) lsd_table.row() << reports[i].subject_id << reports[i].condition << lsd_corr[i];
    run.write("cues_per_direction.csv", per_dir.str());
    run.write("cues_per_subject.csv", per_subject.str());
    run.write("lsd_per_subject.csv", lsd_table.str());

    using Getter = double (*)(const CueReport&);
    const std::vector<std::pair<std::string, Getter>> metrics{
        {"mean_abs_itd_us", [](const CueReport& r) { return r.mean_abs_itd_us; }},
        {"mean_abs_ild_db", [](const CueReport& r) { return r.mean_abs_ild_db; }},
        {"mean_lsd_db", [](const CueReport& r) { return r.mean_lsd_db; }}};
    report::Csv summary{"condition", "metric", "median", "p25", "p75", "n"};
    auto tests = stats_table();
    for (const auto& [name, get] : metrics) {
      stats::Matrix m(ns, nc);
      for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t c = 0; c < nc; ++c) m(s, c) = get(reports[s * nc + c]);
      }
      for (std::size_t c = 0; c < nc; ++c) {
        const auto q = stats::median_iqr(m.column(c));
        summary.row() << conditions[c] << name << q.median << q.p25 << q.p75 << ns;
      }
      comparison_rows(tests, name, [&] { return stats::compare_conditions(m, conditions, opt.alpha); });
    }
    run.write("cues_summary.csv", summary.str());
    run.write("cues_tests.csv", tests.str());
  });

  run.stage("spatial", [&] {
    const std::vector<CueMetric> metrics{CueMetric::Itd, CueMetric::Ild, CueMetric::Lsd, CueMetric::LsdSigned};
    report::Csv grid{"metric", "condition", "azimuth_deg", "elevation_deg", "status", "n_subjects", "mean_difference", "t",
                     "p_raw", "p_adjusted", "tier", "significant"};
    for (std::size_t c = 0; c < nc; ++c) {
      std::vector<CueReport> cond_reports;
      for (std::size_t s = 0; s < ns; ++s) cond_reports.push_back(reports[s * nc + c]);
      for (auto metric : metrics) {
        if (ns < 3) {
          run.error("spatial maps skipped: " + std::to_string(ns) + " subjects, 3 needed");
          return;
        }
        const auto g = spatial_grid_differences(cond_reports, metric, opt.grid_step_deg, opt.alpha);
        for (const auto& n : g.nodes) {
          const char* status = n.status == NodeStatus::Tested ? "tested"
                               : n.status == NodeStatus::Empty ? "empty"
                                                               : "insufficient_subjects";
          grid.row() << to_string(metric) << conditions[c] << n.position.azimuth_deg() << n.position.elevation_deg()
                     << status << n.n_subjects << n.mean_difference << n.t << n.p_raw << n.p_adjusted << n.tier
                     << (n.significant ? 1 : 0);
        }
        run.write("spatial_" + to_string(metric) + "_" + conditions[c] + ".svg",
                  report::heatmap_svg(g, conditions[c] + " vs " + manifest.reference_condition));
      }
    }
    run.write("spatial_grid.csv", grid.str());
  });

  run.stage("frequency", [&] {
    std::vector<FrequencyLsdCurve> curves(nc);
    for (std::size_t c = 0; c < nc; ++c) {
      std::vector<HrirSet> cs;
      for (std::size_t s = 0; s < ns; ++s) cs.push_back(cands[s][c]);
      curves[c] = lsd_frequency_curve(cs, refs, opt.metric, opt.match_tolerance_deg);
    }
    report::Csv table{"condition", "bin", "frequency_hz", "mean_db", "sd_db", "n_subjects"};
    for (std::size_t c = 0; c < nc; ++c) {
      for (std::size_t k = 0; k < curves[c].freq_bins_hz.size(); ++k) {
        table.row() << conditions[c] << k << curves[c].freq_bins_hz[k] << curves[c].mean_db[k] << curves[c].sd_db[k]
                    << curves[c].n_subjects;
      }
    }
    run.write("lsd_frequency.csv", table.str());

    std::vector<std::pair<std::string, stats::ClusterResult>> pairs;
    report::Csv cl{"a", "b", "first_bin", "last_bin", "first_hz", "last_hz", "mass", "p_raw", "p_adjusted", "higher",
                   "significant"};
    if (ns >= 3) {
      stats::ClusterOptions co;
      co.alpha_cluster = opt.cluster_alpha;
      co.n_permutations = opt.n_permutations;
      co.seed = opt.seed;
      co.jobs = common.jobs;
      for (std::size_t a = 0; a < nc; ++a) {
        for (std::size_t b = a + 1; b < nc; ++b) {
          auto res = stats::cluster_permutation_freq(curves[a].subject_curves, curves[b].subject_curves, co);
          for (const auto& c : res.clusters) {
            cl.row() << conditions[a] << conditions[b] << c.first_bin << c.last_bin << curves[a].freq_bins_hz[c.first_bin]
                     << curves[a].freq_bins_hz[c.last_bin] << c.mass << c.p_raw << c.p_adjusted
                     << (c.higher == stats::HigherCondition::A ? conditions[a] : conditions[b])
                     << (c.p_adjusted < co.alpha_cluster ? 1 : 0);
          }
          pairs.emplace_back(conditions[a] + " vs " + conditions[b], std::move(res));
        }
      }
    } else {
      run.error("frequency clusters skipped: " + std::to_string(ns) + " subjects, 3 needed");
    }
    run.write("frequency_clusters.csv", cl.str());
    std::vector<report::CurveSeries> series;
    for (std::size_t c = 0; c < nc; ++c) series.push_back({conditions[c], &curves[c]});
    run.write("lsd_frequency.svg", report::frequency_svg(series, pairs, "LSD by frequency vs " + manifest.reference_condition));
  });

  run.finish();
  log("compare: " + std::to_string(ns) + " subjects x " + std::to_string(nc) + " conditions -> " + run.dir().string());
  return 0;
}

// ---------------------------------------------------------------------------
// behave

std::map<std::pair<std::string, std::string>, double> read_lsd_table(const fs::path& p) {
  std::istringstream in(io::read_file(p));
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "subject,condition,lsd_db") throw Error(ErrorCode::ParseError, p.string() + ":1: expected header subject,condition,lsd_db");
  std::map<std::pair<std::string, std::string>, double> out;
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.find(',', a == std::string::npos ? a : a + 1);
    double v = 0;
    if (a == std::string::npos || b == std::string::npos || !io::parse_number(line.substr(b + 1), v)) {
      throw Error(ErrorCode::ParseError, p.string() + ":" + std::to_string(no) + ": expected subject,condition,number");
    }
    out[{line.substr(0, a), line.substr(a + 1, b - a - 1)}] = v;
  }
  return out;
}

int cmd_behave(const Common& common, std::string responses, const std::string& manifest_path, const std::string& lsd_path,
               std::string reference, double cone, const std::string& quadrant_rule, const std::string& convention,
               const std::vector<std::string>& argv) {
  std::optional<io::Manifest> manifest;
  if (!manifest_path.empty()) {
    manifest = io::read_manifest(manifest_path);
    if (responses.empty()) {
      if (!manifest->responses) throw Error(ErrorCode::InvalidConfig, "manifest names no responses file; pass --responses");
      responses = manifest->responses->string();
    }
    if (reference.empty()) reference = manifest->reference_condition;
  }
  if (responses.empty()) throw Error(ErrorCode::InvalidConfig, "behave needs --responses or a manifest with 'responses'");
  if (reference.empty()) reference = "measured";
  behaviour::Options bo;
  bo.cone_deg = cone;
  if (quadrant_rule == "strict") {
    bo.quadrant_rule = behaviour::QuadrantRule::StrictMismatch;
  } else if (quadrant_rule == "polar90") {
    bo.quadrant_rule = behaviour::QuadrantRule::PolarErrorOver90;
  } else {
    throw Error(ErrorCode::InvalidConfig, "--quadrant-rule must be strict or polar90");
  }
  if (convention != "ccw" && convention != "cw") throw Error(ErrorCode::InvalidConfig, "--convention must be ccw or cw");
  const auto conv = convention == "cw" ? AzimuthConvention::Clockwise : AzimuthConvention::CounterClockwise;

  Log log(common);
  Run run("behave", output_root(common, manifest ? &*manifest : nullptr) / "behave", common, argv);
  if (manifest) run.manifest = manifest_path;
  run.seed = common.seed.value_or(manifest ? manifest->options.seed : 1);
  const double alpha = manifest ? manifest->options.alpha : 0.05;
  run.config = {{"responses", fs::absolute(responses).lexically_normal().string()},
                {"lsd_table", lsd_path.empty() ? json(nullptr) : json(fs::absolute(lsd_path).lexically_normal().string())},
                {"reference_condition", reference},
                {"cone_deg", cone},
                {"quadrant_rule", quadrant_rule},
                {"azimuth_convention", convention},
                {"alpha", alpha}};

  const auto rl = io::read_response_log(responses, conv);

  run.stage("trials", [&] {
    report::Csv csv{"participant", "condition", "trial", "target_az", "target_el", "resp_az", "resp_el", "great_circle_deg",
                    "lateral_target_deg", "lateral_response_deg", "lateral_error_deg", "polar_target_deg",
                    "polar_response_deg", "polar_error_deg", "confusion", "quadrant_target", "quadrant_response",
                    "quadrant_error", "near_interaural_axis"};
    for (const auto& t : rl.trials) {
      const auto m = behaviour::trial_metrics(t, bo);
      csv.row() << t.participant << t.condition << t.trial_index << t.target.azimuth_deg() << t.target.elevation_deg()
                << t.response.azimuth_deg() << t.response.elevation_deg() << m.great_circle_deg << m.lateral_target_deg
                << m.lateral_response_deg << m.lateral_error_deg << m.polar_target_deg << m.polar_response_deg
                << m.polar_error_deg << behaviour::to_string(m.confusion) << behaviour::to_string(m.quadrant_target)
                << behaviour::to_string(m.quadrant_response) << (m.is_quadrant_error ? 1 : 0)
                << (m.near_interaural_axis ? 1 : 0);
    }
    run.write("trials.csv", csv.str());
  });

  const auto rows = run.stage("participants", [&] { return behaviour::summarise_participants(rl, bo); });
  {
    report::Csv csv{"participant", "condition", "n_trials", "n_locations", "n_near_axis", "great_circle_deg",
                    "lateral_accuracy_deg", "lateral_precision_deg", "polar_accuracy_deg", "polar_precision_deg",
                    "front_back_rate_pct", "quadrant_error_pct", "polar_accuracy_local_deg", "polar_precision_local_deg"};
    for (const auto& r : rows) {
      csv.row() << r.participant << r.condition << r.n_trials << r.n_locations << r.n_near_axis << r.great_circle_deg
                << r.lateral_accuracy_deg << r.lateral_precision_deg << r.polar_accuracy_deg << r.polar_precision_deg
                << r.front_back_rate_pct << r.quadrant_error_pct << r.polar_accuracy_local_deg
                << r.polar_precision_local_deg;
    }
    run.write("participants.csv", csv.str());
  }

  run.stage("group", [&] {
    report::Csv csv{"condition", "metric", "median", "p25", "p75", "n_participants"};
    for (const auto& g : behaviour::group_summary(rows)) {
      csv.row() << g.condition << behaviour::to_string(g.metric) << g.summary.median << g.summary.p25 << g.summary.p75
                << g.n_participants;
    }
    run.write("group.csv", csv.str());
    auto tests = stats_table();
    for (auto metric : behaviour::kMetrics) {
      comparison_rows(tests, behaviour::to_string(metric), [&] { return behaviour::condition_tests(rows, metric); });
    }
    run.write("condition_tests.csv", tests.str());
  });

  if (!lsd_path.empty()) {
    run.stage("lsd_correlation", [&] {
      const auto lsd = read_lsd_table(lsd_path);
      std::map<std::pair<std::string, std::string>, const behaviour::ParticipantSummary*> by;
      for (const auto& r : rows) by[{r.participant, r.condition}] = &r;
      report::Csv csv{"condition", "metric", "n", "r", "p", "note"};
      for (const auto& c : behaviour::conditions_of(rl)) {
        if (c == reference) continue;
        for (auto metric : behaviour::kMetrics) {
          std::vector<double> x, y;
          for (const auto& [key, v] : lsd) {
            if (key.second != c) continue;
            const auto cand = by.find({key.first, c});
            const auto base = by.find({key.first, reference});
            if (cand == by.end() || base == by.end()) continue;
            const double d = cand->second->value(metric) - base->second->value(metric);
            if (!std::isfinite(d)) continue;
            x.push_back(v);
            y.push_back(d);
          }
          try {
            const auto r = behaviour::lsd_performance_correlation(x, y);
            csv.row() << c << behaviour::to_string(metric) << r.n << r.statistic << r.p << r.note;
          } catch (const Error& e) {
            if (!is_statistical(e.code())) throw;
            csv.row() << c << behaviour::to_string(metric) << x.size() << "" << "" << e.what();
          }
        }
      }
      run.write("lsd_correlation.csv", csv.str());
    });
  }

  run.finish();
  log("behave: " + std::to_string(rl.trials.size()) + " trials -> " + run.dir().string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HRTF set evaluation: synthetic fixtures, preprocessing, cue comparison and localisation analysis"};
  app.set_version_flag("--version", HRTFEVAL_VERSION);
  app.require_subcommand(1);
  const std::vector<std::string> args(argv, argv + argc);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", common.out, "Output root (default: $HRTFEVAL_OUT, then the manifest's output_dir)")
        ->envname("HRTFEVAL_OUT");
    sub->add_option("--seed", common.seed, "Seed override");
    sub->add_option("--jobs", common.jobs, "Worker threads")->check(CLI::Range(1U, 256U));
    sub->add_flag("--quiet", common.quiet, "No progress output on stderr");
    sub->add_option("--log", common.log_path, "Append progress messages to this file");
  };

  std::string manifest, config, band, responses, lsd, reference, quadrant_rule = "strict", convention = "ccw";
  std::optional<std::size_t> subjects, n_perm;
  std::optional<double> grid_step;
  double cone = 45.0;

  auto* synth = app.add_subcommand("synth", "Generate spherical-head fixture bundles, a manifest and a response log");
  add_common(synth);
  synth->add_option("--config", config, "Synthesis config (JSON)");
  synth->add_option("--subjects", subjects, "Number of subjects");

  auto* pre = app.add_subcommand("preprocess", "Align, window, level-normalise and remove ITD for every bundle");
  add_common(pre);
  pre->add_option("--manifest", manifest, "Study manifest (JSON)")->required();

  auto* cmp = app.add_subcommand("compare", "Cue errors, spatial maps and frequency-resolved LSD against the reference");
  add_common(cmp);
  cmp->add_option("--manifest", manifest, "Study manifest (JSON), usually the preprocessed one")->required();
  cmp->add_option("--grid-step", grid_step, "Spatial grid step in degrees");
  cmp->add_option("--n-perm", n_perm, "Permutations for the cluster test");
  cmp->add_option("--band", band, "Frequency band lo:hi in Hz for ILD/LSD");

  auto* beh = app.add_subcommand("behave", "Localisation metrics and condition tests from a response log");
  add_common(beh);
  beh->add_option("--responses", responses, "Response log (CSV)");
  beh->add_option("--manifest", manifest, "Manifest providing the response log and reference condition");
  beh->add_option("--lsd", lsd, "lsd_per_subject.csv from compare, enables the LSD correlation table");
  beh->add_option("--reference", reference, "Baseline condition for the LSD correlation");
  beh->add_option("--cone", cone, "Front-back cone half-width in degrees");
  beh->add_option("--quadrant-rule", quadrant_rule, "strict or polar90");
  beh->add_option("--convention", convention, "Azimuth convention of the log: ccw or cw");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*synth) return cmd_synth(common, config, subjects, args);
    if (*pre) return cmd_preprocess(common, manifest, args);
    if (*cmp) return cmd_compare(common, manifest, grid_step, n_perm, band, args);
    if (*beh) return cmd_behave(common, responses, manifest, lsd, reference, cone, quadrant_rule, convention, args);
  } catch (const Error& e) {
    std::cerr << "hrtfeval: " << e.what() << '\n';
    return e.is_internal() ? kExitInternal : kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "hrtfeval: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
