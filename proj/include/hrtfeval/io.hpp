#pragma once

// On-disk formats: the HRIR bundle container, behavioural response logs and
// the JSON batch manifest. See docs/formats.md for the exact layouts.

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hrtfeval/core.hpp"
#include "hrtfeval/error.hpp"
#include "hrtfeval/trial.hpp"

namespace hrtfeval::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Text helpers

/// Shortest decimal string that parses back to the same double.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed for '" + path.string() + "'");
  return data;
}

inline void write_file(const fs::path& path, std::string_view data) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot create '" + path.string() + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// HRIR bundle

inline constexpr std::string_view kBundleMagic = "HRIRB1\n";
inline constexpr int kBundleVersion = 1;

inline void require_single_line(const std::string& s, const char* field) {
  if (s.find('\n') != std::string::npos || s.find('\r') != std::string::npos) {
    throw Error(ErrorCode::InvalidSet, std::string(field) + " must not contain line breaks");
  }
}

/// Serialises a set. Samples are stored as little-endian float32, so
/// in-memory doubles are rounded once; identical input gives identical bytes.
inline std::string encode_bundle(const HrirSet& set) {
  set.validate();
  require_single_line(set.subject_id, "subject_id");
  require_single_line(set.label, "label");
  std::ostringstream h;
  h << kBundleMagic;
  h << "format_version: " << kBundleVersion << '\n';
  h << "subject_id: " << set.subject_id << '\n';
  h << "label: " << set.label << '\n';
  h << "sample_rate_hz: " << set.sample_rate_hz << '\n';
  h << "impulse_length: " << set.length() << '\n';
  h << "direction_count: " << set.size() << '\n';
  h << "byte_order: little\n";
  h << "sample_encoding: float32\n";
  h << "no_itd: " << (set.no_itd() ? 1 : 0) << '\n';
  for (const auto& d : set.directions) {
    h << "direction: " << format_number(d.azimuth_deg()) << ' ' << format_number(d.elevation_deg()) << ' '
      << format_number(d.distance_m()) << '\n';
  }
  if (set.itd_shifts) {
    for (const auto& s : *set.itd_shifts) h << "itd_shift: " << s.left << ' ' << s.right << '\n';
  }
  h << '\n';
  std::string out = h.str();
  const std::size_t header_size = out.size();
  out.resize(header_size + set.size() * 2 * set.length() * 4);
  char* p = out.data() + header_size;
  for (const auto& imp : set.impulses) {
    for (Ear e : kEars) {
      for (double v : imp.ear(e)) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int b = 0; b < 4; ++b) *p++ = static_cast<char>((bits >> (8 * b)) & 0xFFU);
      }
    }
  }
  return out;
}

inline void write_bundle(const HrirSet& set, const fs::path& path) { write_file(path, encode_bundle(set)); }

inline HrirSet decode_bundle(std::string_view data, const std::string& source = "<memory>") {
  auto fail = [&](ErrorCode code, std::size_t offset, const std::string& msg) -> Error {
    return Error(code, source + " @" + std::to_string(offset) + ": " + msg);
  };
  if (data.substr(0, kBundleMagic.size()) != kBundleMagic) {
    throw fail(ErrorCode::MalformedHeader, 0, "missing HRIRB1 magic");
  }
  std::size_t pos = kBundleMagic.size();
  std::optional<int> version;
  std::optional<std::uint32_t> fs_hz;
  std::optional<std::size_t> length, count;
  std::optional<int> no_itd;
  std::optional<std::string> subject, label;
  bool byte_order = false, encoding = false;
  std::vector<Direction> dirs;
  std::vector<ItdShift> shifts;
  constexpr std::size_t kMaxCount = 1U << 24;
  while (true) {
    const std::size_t eol = data.find('\n', pos);
    if (eol == std::string_view::npos) throw fail(ErrorCode::MalformedHeader, pos, "header not terminated by a blank line");
    const std::string_view line = data.substr(pos, eol - pos);
    const std::size_t line_pos = pos;
    pos = eol + 1;
    if (line.empty()) break;
    const std::size_t colon = line.find(": ");
    if (colon == std::string_view::npos) throw fail(ErrorCode::MalformedHeader, line_pos, "expected 'key: value'");
    const std::string_view key = line.substr(0, colon);
    const std::string_view value = line.substr(colon + 2);
    auto bad = [&](const char* what) { return fail(ErrorCode::MalformedHeader, line_pos, std::string(key) + ": " + what); };
    if (key == "format_version") {
      int v = 0;
      if (!parse_number(value, v)) throw bad("not an integer");
      if (v != kBundleVersion) throw fail(ErrorCode::UnsupportedVersion, line_pos, "format_version " + std::to_string(v));
      version = v;
    } else if (key == "subject_id") {
      subject = std::string(value);
    } else if (key == "label") {
      label = std::string(value);
    } else if (key == "sample_rate_hz") {
      std::uint32_t v = 0;
      if (!parse_number(value, v) || v == 0) throw bad("not a positive integer");
      fs_hz = v;
    } else if (key == "impulse_length" || key == "direction_count") {
      std::size_t v = 0;
      if (!parse_number(value, v) || v == 0 || v > kMaxCount) throw bad("not a positive integer in range");
      (key == "impulse_length" ? length : count) = v;
    } else if (key == "byte_order") {
      if (value != "little") throw bad("only 'little' is supported");
      byte_order = true;
    } else if (key == "sample_encoding") {
      if (value != "float32") throw bad("only 'float32' is supported");
      encoding = true;
    } else if (key == "no_itd") {
      if (value != "0" && value != "1") throw bad("expected 0 or 1");
      no_itd = value == "1" ? 1 : 0;
    } else if (key == "direction") {
      std::istringstream ss{std::string(value)};
      std::string a, e, r, extra;
      ss >> a >> e >> r;
      double az = 0, el = 0, dist = 0;
      if (!parse_number(a, az) || !parse_number(e, el) || !parse_number(r, dist) || (ss >> extra)) {
        throw bad("expected 'azimuth elevation distance'");
      }
      if (dirs.size() >= kMaxCount) throw bad("too many directions");
      try {
        dirs.emplace_back(az, el, dist);
      } catch (const Error& err) {
        throw bad(err.what());
      }
    } else if (key == "itd_shift") {
      std::istringstream ss{std::string(value)};
      std::string l, r, extra;
      ss >> l >> r;
      ItdShift s;
      if (!parse_number(l, s.left) || !parse_number(r, s.right) || (ss >> extra)) throw bad("expected 'left right'");
      if (shifts.size() >= kMaxCount) throw bad("too many shifts");
      shifts.push_back(s);
    } else {
      throw fail(ErrorCode::MalformedHeader, line_pos, "unknown key '" + std::string(key) + "'");
    }
  }
  if (!version) throw fail(ErrorCode::MalformedHeader, pos, "missing format_version");
  if (!fs_hz || !length || !count || !no_itd || !subject || !label || !byte_order || !encoding) {
    throw fail(ErrorCode::MalformedHeader, pos, "missing required header field");
  }
  if (dirs.size() != *count) {
    throw fail(ErrorCode::MalformedHeader, pos, "direction_count " + std::to_string(*count) + " but " +
                                                    std::to_string(dirs.size()) + " direction lines");
  }
  if (*no_itd == 1 ? shifts.size() != *count : !shifts.empty()) {
    throw fail(ErrorCode::MalformedHeader, pos, "itd_shift lines must be present (one per direction) iff no_itd is 1");
  }
  const std::size_t expected = *count * 2 * *length * 4;
  const std::size_t actual = data.size() - pos;
  if (actual != expected) {
    throw fail(ErrorCode::PayloadSizeMismatch, pos, "payload has " + std::to_string(actual) + " bytes, expected " +
                                                        std::to_string(expected));
  }
  HrirSet set;
  set.sample_rate_hz = *fs_hz;
  set.subject_id = *subject;
  set.label = *label;
  set.directions = std::move(dirs);
  if (*no_itd == 1) set.itd_shifts = std::move(shifts);
  set.impulses.resize(*count);
  const auto* p = reinterpret_cast<const unsigned char*>(data.data() + pos);
  for (auto& imp : set.impulses) {
    for (Ear e : kEars) {
      auto& x = imp.ear(e);
      x.resize(*length);
      for (auto& v : x) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(*p++) << (8 * b);
        const float f = std::bit_cast<float>(bits);
        if (!std::isfinite(f)) throw fail(ErrorCode::InvalidSet, pos, "payload contains a non-finite sample");
        v = static_cast<double>(f);
      }
    }
  }
  try {
    set.validate();
  } catch (const Error& err) {
    throw fail(ErrorCode::InvalidSet, 0, err.what());
  }
  return set;
}

inline HrirSet read_bundle(const fs::path& path) { return decode_bundle(read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Response log

inline constexpr std::string_view kResponseLogHeader = "participant,condition,trial,target_az,target_el,resp_az,resp_el";

inline ResponseLog parse_response_log(std::string_view text, const std::string& source = "<memory>",
                                      AzimuthConvention conv = AzimuthConvention::CounterClockwise) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  ResponseLog log;
  std::set<std::tuple<std::string, std::string, long>> seen;
  std::size_t pos = 0, line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto err = [&](const std::string& msg) {
      return Error(ErrorCode::ParseError, source + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (!header_seen) {
      if (line != kResponseLogHeader) throw err("expected header '" + std::string(kResponseLogHeader) + "'");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 7) throw err("expected 7 fields, got " + std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty()) throw err("participant and condition must be non-empty");
    Trial t;
    t.participant = std::string(fields[0]);
    t.condition = std::string(fields[1]);
    if (!parse_number(fields[2], t.trial_index)) throw err("trial is not an integer");
    std::array<double, 4> v{};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!parse_number(fields[3 + i], v[i])) throw err("field " + std::to_string(4 + i) + " is not a number");
    }
    try {
      t.target = Direction::from_convention(v[0], v[1], conv);
      t.response = Direction::from_convention(v[2], v[3], conv);
    } catch (const Error& e) {
      throw err(e.what());
    }
    if (!seen.emplace(t.participant, t.condition, t.trial_index).second) {
      throw Error(ErrorCode::DuplicateTrial, source + ":" + std::to_string(line_no) + ": duplicate (" + t.participant + ", " +
                                                 t.condition + ", " + std::to_string(t.trial_index) + ")");
    }
    log.trials.push_back(std::move(t));
  }
  if (!header_seen) throw Error(ErrorCode::ParseError, source + ":1: empty file");
  return log;
}

inline ResponseLog read_response_log(const fs::path& path, AzimuthConvention conv = AzimuthConvention::CounterClockwise) {
  return parse_response_log(read_file(path), path.string(), conv);
}

inline std::string encode_response_log(const ResponseLog& log) {
  std::string out(kResponseLogHeader);
  out += '\n';
  for (const auto& t : log.trials) {
    if (t.participant.find_first_of(",\n\r") != std::string::npos || t.condition.find_first_of(",\n\r") != std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "participant/condition must not contain commas or line breaks");
    }
    out += t.participant + ',' + t.condition + ',' + std::to_string(t.trial_index) + ',' +
           format_number(t.target.azimuth_deg()) + ',' + format_number(t.target.elevation_deg()) + ',' +
           format_number(t.response.azimuth_deg()) + ',' + format_number(t.response.elevation_deg()) + '\n';
  }
  return out;
}

inline void write_response_log(const ResponseLog& log, const fs::path& path) { write_file(path, encode_response_log(log)); }

// ---------------------------------------------------------------------------
// Batch manifest

struct ConditionEntry {
  std::string name;
  fs::path path;
};

struct SubjectEntry {
  std::string id;
  fs::path reference;
  std::vector<ConditionEntry> conditions;
};

struct AnalysisOptions {
  MetricConfig metric{};
  /// Band used for the per-subject LSD that feeds the behavioural correlation.
  std::pair<double, double> correlation_band_hz{1000.0, 16000.0};
  double grid_step_deg = 45.0;
  double alpha = 0.05;
  double cluster_alpha = 0.05;
  std::size_t n_permutations = 999;
  std::uint64_t seed = 1;
  double itd_padding_ms = 0.8;
  std::size_t fade_in_samples = 16;
  std::size_t fade_out_samples = 128;
  double match_tolerance_deg = kDefaultMatchToleranceDeg;
  std::string output_dir = "out";
};

struct Manifest {
  fs::path base_dir;
  std::string reference_condition = "measured";
  std::optional<fs::path> level_reference;
  std::optional<fs::path> responses;
  std::vector<SubjectEntry> subjects;
  AnalysisOptions options;

  /// Condition names in the order of the first subject.
  std::vector<std::string> condition_names() const {
    std::vector<std::string> out;
    if (!subjects.empty()) {
      for (const auto& c : subjects.front().conditions) out.push_back(c.name);
    }
    return out;
  }

  /// Throws IoFailure naming the first referenced file that does not exist.
  void require_inputs_exist() const {
    auto check = [](const fs::path& p) {
      if (!fs::exists(p)) throw Error(ErrorCode::IoFailure, "missing input '" + p.string() + "'");
    };
    if (level_reference) check(*level_reference);
    for (const auto& s : subjects) {
      check(s.reference);
      for (const auto& c : s.conditions) check(c.path);
    }
  }
};

namespace detail {

using nlohmann::json;

inline std::pair<double, double> parse_band(const json& j, const char* key) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be [lo, hi]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline Manifest parse_manifest(std::string_view text, const fs::path& base_dir) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("manifest is not valid JSON: ") + e.what());
  }
  Manifest m;
  m.base_dir = base_dir;
  auto resolve = [&](const std::string& p) { return (base_dir / fs::path(p)).lexically_normal(); };
  try {
    if (!j.is_object() || !j.contains("subjects") || !j["subjects"].is_array()) {
      throw Error(ErrorCode::InvalidConfig, "manifest needs a 'subjects' array");
    }
    m.reference_condition = j.value("reference_condition", std::string("measured"));
    if (j.contains("level_reference") && !j["level_reference"].is_null()) {
      m.level_reference = resolve(j["level_reference"].get<std::string>());
    }
    if (j.contains("responses") && !j["responses"].is_null()) m.responses = resolve(j["responses"].get<std::string>());
    std::set<std::string> ids;
    for (const auto& s : j["subjects"]) {
      SubjectEntry e;
      e.id = s.at("id").get<std::string>();
      if (!ids.insert(e.id).second) throw Error(ErrorCode::InvalidConfig, "duplicate subject id '" + e.id + "'");
      e.reference = resolve(s.at("reference").get<std::string>());
      std::set<std::string> names{m.reference_condition};
      for (const auto& c : s.at("conditions")) {
        ConditionEntry ce{c.at("name").get<std::string>(), resolve(c.at("path").get<std::string>())};
        if (!names.insert(ce.name).second) {
          throw Error(ErrorCode::InvalidConfig, "condition name '" + ce.name + "' is not unique for subject '" + e.id + "'");
        }
        e.conditions.push_back(std::move(ce));
      }
      m.subjects.push_back(std::move(e));
    }
    if (m.subjects.empty()) throw Error(ErrorCode::InvalidConfig, "manifest lists no subjects");
    const auto names = m.condition_names();
    for (const auto& s : m.subjects) {
      std::vector<std::string> own;
      for (const auto& c : s.conditions) own.push_back(c.name);
      if (own != names) throw Error(ErrorCode::InvalidConfig, "subject '" + s.id + "' lists different conditions");
    }
    if (j.contains("options")) {
      const auto& o = j["options"];
      auto& a = m.options;
      a.metric.epsilon = o.value("epsilon", a.metric.epsilon);
      a.metric.onset_threshold_fraction = o.value("onset_threshold_fraction", a.metric.onset_threshold_fraction);
      a.metric.upsample_factor = o.value("upsample_factor", a.metric.upsample_factor);
      if (o.contains("band_hz") && !o["band_hz"].is_null()) a.metric.freq_band_hz = detail::parse_band(o["band_hz"], "band_hz");
      if (o.contains("correlation_band_hz")) a.correlation_band_hz = detail::parse_band(o["correlation_band_hz"], "correlation_band_hz");
      a.grid_step_deg = o.value("grid_step_deg", a.grid_step_deg);
      a.alpha = o.value("alpha", a.alpha);
      a.cluster_alpha = o.value("cluster_alpha", a.cluster_alpha);
      a.n_permutations = o.value("n_permutations", a.n_permutations);
      a.seed = o.value("seed", a.seed);
      a.itd_padding_ms = o.value("itd_padding_ms", a.itd_padding_ms);
      a.fade_in_samples = o.value("fade_in_samples", a.fade_in_samples);
      a.fade_out_samples = o.value("fade_out_samples", a.fade_out_samples);
      a.match_tolerance_deg = o.value("match_tolerance_deg", a.match_tolerance_deg);
      a.output_dir = o.value("output_dir", a.output_dir);
    }
    m.options.metric.validate();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("manifest: ") + e.what());
  }
  return m;
}

inline Manifest read_manifest(const fs::path& path) {
  return parse_manifest(read_file(path), fs::absolute(path).parent_path());
}

inline nlohmann::json options_to_json(const AnalysisOptions& a) {
  nlohmann::json o;
  o["epsilon"] = a.metric.epsilon;
  o["onset_threshold_fraction"] = a.metric.onset_threshold_fraction;
  o["upsample_factor"] = a.metric.upsample_factor;
  o["band_hz"] = a.metric.freq_band_hz ? nlohmann::json::array({a.metric.freq_band_hz->first, a.metric.freq_band_hz->second})
                                       : nlohmann::json(nullptr);
  o["correlation_band_hz"] = {a.correlation_band_hz.first, a.correlation_band_hz.second};
  o["grid_step_deg"] = a.grid_step_deg;
  o["alpha"] = a.alpha;
  o["cluster_alpha"] = a.cluster_alpha;
  o["n_permutations"] = a.n_permutations;
  o["seed"] = a.seed;
  o["itd_padding_ms"] = a.itd_padding_ms;
  o["fade_in_samples"] = a.fade_in_samples;
  o["fade_out_samples"] = a.fade_out_samples;
  o["match_tolerance_deg"] = a.match_tolerance_deg;
  o["output_dir"] = a.output_dir;
  return o;
}

/// Writes the manifest with paths relative to the manifest's own directory.
inline std::string encode_manifest(const Manifest& m, const fs::path& manifest_dir) {
  auto rel = [&](const fs::path& p) { return fs::path(p).lexically_relative(manifest_dir).generic_string(); };
  nlohmann::json j;
  j["format"] = "hrtfeval-manifest";
  j["version"] = 1;
  j["reference_condition"] = m.reference_condition;
  if (m.level_reference) j["level_reference"] = rel(*m.level_reference);
  if (m.responses) j["responses"] = rel(*m.responses);
  j["subjects"] = nlohmann::json::array();
  for (const auto& s : m.subjects) {
    nlohmann::json sj;
    sj["id"] = s.id;
    sj["reference"] = rel(s.reference);
    sj["conditions"] = nlohmann::json::array();
    for (const auto& c : s.conditions) sj["conditions"].push_back({{"name", c.name}, {"path", rel(c.path)}});
    j["subjects"].push_back(sj);
  }
  j["options"] = options_to_json(m.options);
  return j.dump(2) + "\n";
}

inline void write_manifest(const Manifest& m, const fs::path& path) {
  const auto dir = fs::absolute(path).parent_path();
  write_file(path, encode_manifest(m, dir));
}

}  // namespace hrtfeval::io
