#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hrtfeval/behavioral.hpp"
#include "hrtfeval/io.hpp"
#include "hrtfeval/preprocess.hpp"
#include "hrtfeval/report.hpp"

using namespace hrtfeval;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const auto p = fs::path(HRTFEVAL_TEST_TMP_DIR) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Result run(const std::string& args, const std::string& env = "") {
  const auto err_file = fs::path(HRTFEVAL_TEST_TMP_DIR) / "stderr.txt";
  fs::create_directories(err_file.parent_path());
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(HRTFEVAL_CLI) + " " + args + " 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, io::read_file(err_file)};
}

using Table = std::vector<std::map<std::string, std::string>>;

// Plain comma split; only used on tables without quoted fields.
Table read_csv(const fs::path& p) {
  std::istringstream in(io::read_file(p));
  std::string line;
  std::vector<std::string> header;
  Table rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  };
  std::getline(in, line);
  header = split(line);
  while (std::getline(in, line)) {
    const auto f = split(line);
    EXPECT_EQ(f.size(), header.size()) << p << ": " << line;
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < f.size(); ++i) row[header[i]] = f[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

double number(const std::string& s) {
  double v = 0;
  EXPECT_TRUE(io::parse_number(s, v)) << s;
  return v;
}

std::map<std::string, std::string> digests(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "run_record.json") {
      out[fs::relative(e.path(), dir).generic_string()] = report::sha256_file(e.path());
    }
  }
  return out;
}

void expect_record_matches_files(const fs::path& dir) {
  const auto rec = json::parse(io::read_file(dir / "run_record.json"));
  const auto files = digests(dir);
  ASSERT_EQ(rec["outputs"].size(), files.size()) << dir;
  for (const auto& o : rec["outputs"]) {
    const auto path = o["path"].get<std::string>();
    ASSERT_TRUE(files.count(path)) << path;
    EXPECT_EQ(o["sha256"].get<std::string>(), files.at(path)) << path;
  }
}

}  // namespace

TEST(Cli, SynthWritesBundlesAndRerunsIdentically) {
  const auto a = scratch("synth_a"), b = scratch("synth_b");
  ASSERT_EQ(run("synth --subjects 2 --quiet --out " + a.string()).code, 0);
  ASSERT_EQ(run("synth --subjects 2 --quiet --jobs 3 --out " + b.string()).code, 0);
  std::size_t bundles = 0;
  for (const auto& [path, _] : digests(a / "synth")) bundles += path.ends_with(".hrirb");
  EXPECT_EQ(bundles, 6U);
  EXPECT_EQ(digests(a / "synth"), digests(b / "synth"));
  expect_record_matches_files(a / "synth");
  const auto rec = json::parse(io::read_file(a / "synth" / "run_record.json"));
  EXPECT_EQ(rec["command"], "synth");
  EXPECT_EQ(rec["config"]["subjects"], 2);
  EXPECT_TRUE(rec["config"].contains("sphere"));
  EXPECT_FALSE(rec["timings"].empty());

  const auto m = io::read_manifest(a / "synth" / "manifest.json");
  EXPECT_EQ(m.subjects.size(), 2U);
  EXPECT_EQ(m.condition_names(), (std::vector<std::string>{"pr", "random"}));
  m.require_inputs_exist();
}

TEST(Cli, SeedChangesOutputs) {
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  ASSERT_EQ(run("synth --subjects 1 --quiet --out " + a.string()).code, 0);
  ASSERT_EQ(run("synth --subjects 1 --quiet --seed 2 --out " + b.string()).code, 0);
  EXPECT_NE(digests(a / "synth").at("S01/pr.hrirb"), digests(b / "synth").at("S01/pr.hrirb"));
}

TEST(Cli, PreprocessProducesNoItdBundles) {
  const auto root = scratch("pre");
  ASSERT_EQ(run("synth --subjects 2 --quiet --out " + root.string()).code, 0);
  const std::string args = "preprocess --quiet --manifest " + (root / "synth" / "manifest.json").string() + " --out ";
  ASSERT_EQ(run(args + root.string()).code, 0);
  const auto first = digests(root / "preprocess");
  std::size_t bundles = 0;
  for (const auto& [path, _] : first) {
    if (!path.ends_with(".hrirb")) continue;
    ++bundles;
    const auto set = io::read_bundle(root / "preprocess" / path);
    ASSERT_TRUE(set.no_itd());
    for (std::size_t d = 0; d < set.size(); ++d) {
      for (Ear e : kEars) EXPECT_NEAR(detect_onset(set.ear(d, e), 0.2, 1), 38.0, 1.0) << path << " " << d;
    }
  }
  EXPECT_EQ(bundles, 6U);
  expect_record_matches_files(root / "preprocess");
  ASSERT_EQ(run(args + root.string()).code, 0);
  EXPECT_EQ(digests(root / "preprocess"), first);
}

TEST(Cli, PreprocessReportsMissingAndBrokenInputs) {
  const auto root = scratch("pre_err");
  ASSERT_EQ(run("synth --subjects 2 --quiet --out " + root.string()).code, 0);
  auto text = io::read_file(root / "synth" / "manifest.json");
  const auto missing = text;
  auto broken = text;
  const std::string from = "S01/pr.hrirb";
  auto m2 = missing;
  m2.replace(m2.find(from), from.size(), "S01/absent.hrirb");
  io::write_file(root / "synth" / "missing.json", m2);
  auto r = run("preprocess --quiet --manifest " + (root / "synth" / "missing.json").string() + " --out " + root.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("S01/absent.hrirb"), std::string::npos) << r.err;

  // a corrupt bundle fails its subject only; the others are still written
  io::write_file(root / "synth" / "S01" / "pr.hrirb", "HRIRB1\ngarbage");
  r = run("preprocess --quiet --manifest " + (root / "synth" / "manifest.json").string() + " --out " + root.string());
  EXPECT_EQ(r.code, 2);
  const auto rec = json::parse(io::read_file(root / "preprocess" / "run_record.json"));
  ASSERT_EQ(rec["errors"].size(), 1U);
  EXPECT_NE(rec["errors"][0].get<std::string>().find("S01: MalformedHeader"), std::string::npos);
  EXPECT_TRUE(fs::exists(root / "preprocess" / "S02" / "random.hrirb"));
  EXPECT_FALSE(fs::exists(root / "preprocess" / "manifest.json"));
}

TEST(Cli, SelfComparisonIsNull) {
  const auto root = scratch("self");
  ASSERT_EQ(run("synth --subjects 3 --quiet --out " + root.string()).code, 0);
  auto m = io::read_manifest(root / "synth" / "manifest.json");
  for (auto& s : m.subjects) {
    for (auto& c : s.conditions) c.path = s.reference;
  }
  io::write_manifest(m, root / "synth" / "self.json");
  ASSERT_EQ(run("compare --quiet --n-perm 199 --manifest " + (root / "synth" / "self.json").string() + " --out " +
                root.string())
                .code,
            0);
  for (const auto& row : read_csv(root / "compare" / "cues_per_subject.csv")) {
    EXPECT_EQ(row.at("mean_abs_itd_us"), "0");
    EXPECT_EQ(row.at("mean_abs_ild_db"), "0");
    EXPECT_EQ(row.at("mean_lsd_db"), "0");
  }
  const auto grid = read_csv(root / "compare" / "spatial_grid.csv");
  ASSERT_FALSE(grid.empty());
  for (const auto& row : grid) EXPECT_EQ(row.at("significant"), "0");
  EXPECT_TRUE(read_csv(root / "compare" / "frequency_clusters.csv").empty());
  expect_record_matches_files(root / "compare");
}

TEST(Cli, CompareMatchesPerturbationBookkeeping) {
  const auto root = scratch("bookkeeping");
  io::write_file(root / "cfg.json", R"({
    "subjects": 3,
    "conditions": [
      {"name": "jitter", "perturbations": [{"gain_jitter_db": 2.5}, {"ear": "left", "delay_samples": 3, "directions": [4, 9]}]},
      {"name": "gain", "perturbations": [{"ear": "right", "gain_db": -4}]}
    ]})");
  ASSERT_EQ(run("synth --quiet --config " + (root / "cfg.json").string() + " --out " + root.string()).code, 0);
  ASSERT_EQ(run("compare --quiet --n-perm 99 --manifest " + (root / "synth" / "manifest.json").string() + " --out " +
                root.string())
                .code,
            0);
  const auto book = read_csv(root / "synth" / "perturbations.csv");
  const auto cues = read_csv(root / "compare" / "cues_per_direction.csv");
  ASSERT_EQ(book.size(), cues.size());
  // both tables list subject, then condition, then reference direction order
  for (std::size_t i = 0; i < book.size(); ++i) {
    ASSERT_EQ(book[i].at("subject"), cues[i].at("subject"));
    ASSERT_EQ(book[i].at("condition"), cues[i].at("condition"));
    EXPECT_EQ(number(book[i].at("azimuth_deg")), number(cues[i].at("azimuth_deg")));
    // bundles store float32 samples, which costs about 1e-6 dB of ILD
    EXPECT_NEAR(number(cues[i].at("ild_signed_db")), number(book[i].at("ild_delta_db")), 1e-5) << i;
    const double itd_delta = number(cues[i].at("itd_cand_us")) - number(cues[i].at("itd_ref_us"));
    EXPECT_NEAR(itd_delta, number(book[i].at("itd_delta_us")), 1e-9) << i;
  }
}

TEST(Cli, BehaveMatchesLibraryRecomputation) {
  const auto root = scratch("behave");
  ASSERT_EQ(run("synth --subjects 5 --quiet --seed 11 --out " + root.string()).code, 0);
  const auto log_path = root / "synth" / "responses.csv";
  ASSERT_EQ(run("behave --quiet --responses " + log_path.string() + " --out " + root.string()).code, 0);
  const auto rows = behaviour::summarise_participants(io::read_response_log(log_path));
  const auto table = read_csv(root / "behave" / "participants.csv");
  ASSERT_EQ(table.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(table[i].at("participant"), rows[i].participant);
    EXPECT_EQ(table[i].at("condition"), rows[i].condition);
    const std::pair<const char*, double> expected[] = {
        {"great_circle_deg", rows[i].great_circle_deg},
        {"lateral_accuracy_deg", rows[i].lateral_accuracy_deg},
        {"lateral_precision_deg", rows[i].lateral_precision_deg},
        {"polar_accuracy_deg", rows[i].polar_accuracy_deg},
        {"polar_precision_deg", rows[i].polar_precision_deg},
        {"front_back_rate_pct", rows[i].front_back_rate_pct},
        {"quadrant_error_pct", rows[i].quadrant_error_pct},
        {"polar_accuracy_local_deg", rows[i].polar_accuracy_local_deg},
        {"polar_precision_local_deg", rows[i].polar_precision_local_deg}};
    for (const auto& [column, value] : expected) EXPECT_EQ(table[i].at(column), io::format_number(value)) << i << column;
    EXPECT_EQ(table[i].at("n_trials"), std::to_string(rows[i].n_trials));
  }
  EXPECT_EQ(read_csv(root / "behave" / "trials.csv").size(), io::read_response_log(log_path).trials.size());
  expect_record_matches_files(root / "behave");
}

TEST(Cli, BehavePerfectAndMirroredResponses) {
  const auto root = scratch("behave_fixtures");
  ResponseLog perfect, mirrored;
  long idx = 1;
  for (int p = 1; p <= 3; ++p) {
    for (double az : {0.0, 30.0, 150.0, 180.0, 210.0, 330.0}) {
      for (double el : {-20.0, 20.0, -20.0, 20.0}) {
        const Direction t(az, el);
        const std::string who = "P" + std::to_string(p);
        perfect.trials.push_back({who, "a", idx, t, t});
        perfect.trials.push_back({who, "b", idx, t, t});
        mirrored.trials.push_back({who, "a", idx, t, mirror_front_back(t)});
        ++idx;
      }
    }
  }
  io::write_response_log(perfect, root / "perfect.csv");
  io::write_response_log(mirrored, root / "mirrored.csv");
  ASSERT_EQ(run("behave --quiet --responses " + (root / "perfect.csv").string() + " --out " + (root / "p").string()).code, 0);
  for (const auto& row : read_csv(root / "p" / "behave" / "group.csv")) EXPECT_EQ(row.at("median"), "0") << row.at("metric");
  ASSERT_EQ(run("behave --quiet --responses " + (root / "mirrored.csv").string() + " --out " + (root / "m").string()).code, 0);
  for (const auto& row : read_csv(root / "m" / "behave" / "participants.csv")) {
    EXPECT_EQ(row.at("front_back_rate_pct"), "100");
    EXPECT_EQ(row.at("quadrant_error_pct"), "100");
  }
}

TEST(Cli, ExitCodesAndOutputLocation) {
  const auto root = scratch("exit");
  io::write_file(root / "short.json", R"({"sphere": {"impulse_length": 40}})");
  auto r = run("synth --quiet --config " + (root / "short.json").string() + " --out " + root.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("DelayExceedsLength"), std::string::npos) << r.err;
  io::write_file(root / "bad.json", "{ not json");
  EXPECT_EQ(run("synth --quiet --config " + (root / "bad.json").string() + " --out " + root.string()).code, 2);
  EXPECT_EQ(run("compare --manifest " + (root / "none.json").string()).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("synth --jobs 0").code, 2);
  EXPECT_EQ(run("--help > /dev/null").code, 0);

  const auto env_dir = root / "from_env";
  EXPECT_EQ(run("synth --quiet --subjects 1", "HRTFEVAL_OUT=" + env_dir.string()).code, 0);
  EXPECT_TRUE(fs::exists(env_dir / "synth" / "manifest.json"));
  const auto flag_dir = root / "from_flag";
  EXPECT_EQ(run("synth --quiet --subjects 1 --out " + flag_dir.string(), "HRTFEVAL_OUT=" + env_dir.string() + "_x").code, 0);
  EXPECT_TRUE(fs::exists(flag_dir / "synth" / "manifest.json"));
  EXPECT_FALSE(fs::exists(env_dir.string() + "_x"));
}

TEST(Cli, BandAndGridFlagsReachTheRunRecord) {
  const auto root = scratch("flags");
  ASSERT_EQ(run("synth --subjects 3 --quiet --out " + root.string()).code, 0);
  const auto r = run("compare --quiet --band 1000:16000 --grid-step 30 --n-perm 49 --seed 5 --manifest " +
                     (root / "synth" / "manifest.json").string() + " --out " + root.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rec = json::parse(io::read_file(root / "compare" / "run_record.json"));
  EXPECT_EQ(rec["config"]["band_hz"], json::array({1000.0, 16000.0}));
  EXPECT_EQ(rec["config"]["grid_step_deg"], 30.0);
  EXPECT_EQ(rec["config"]["n_permutations"], 49);
  EXPECT_EQ(rec["seed"], 5);
  for (const char* key : {"epsilon", "onset_threshold_fraction", "upsample_factor", "alpha", "cluster_alpha",
                          "itd_padding_ms", "fade_in_samples", "fade_out_samples", "match_tolerance_deg"}) {
    EXPECT_TRUE(rec["config"].contains(key)) << key;
  }
  // 30 degree grid: 12 azimuths x 5 elevations + 2 poles, for 4 metrics x 2 conditions
  EXPECT_EQ(read_csv(root / "compare" / "spatial_grid.csv").size(), 62U * 8U);
  // 1-16 kHz at 187.5 Hz spacing
  const auto freq = read_csv(root / "compare" / "lsd_frequency.csv");
  EXPECT_EQ(number(freq.front().at("frequency_hz")), 1125.0);
}
