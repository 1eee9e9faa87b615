#pragma once

// Report outputs: CSV tables, content digests and SVG figures (spatial
// difference heatmaps, frequency-resolved LSD with cluster bars).
// sha256_* need OpenSSL's libcrypto at link time.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <exception>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "hrtfeval/cluster.hpp"
#include "hrtfeval/cue_metrics.hpp"
#include "hrtfeval/io.hpp"

namespace hrtfeval::report {

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class Csv {
 public:
  explicit Csv(std::initializer_list<std::string_view> header) {
    for (auto h : header) header_.emplace_back(h);
    append(header_);
  }
  explicit Csv(const std::vector<std::string>& header) : header_(header) { append(header_); }

  /// Collects one row; numbers go through format_number.
  class Row {
   public:
    explicit Row(Csv& csv) : csv_(csv) {}
    Row(const Row&) = delete;
    Row& operator=(const Row&) = delete;
    // a short row surfaces as Internal unless the stack is already unwinding
    ~Row() noexcept(false) {
      if (std::uncaught_exceptions() == 0) csv_.append(fields_);
    }
    Row& operator<<(std::string_view s) {
      fields_.emplace_back(s);
      return *this;
    }
    Row& operator<<(const std::string& s) { return *this << std::string_view(s); }
    Row& operator<<(const char* s) { return *this << std::string_view(s); }
    Row& operator<<(double v) {
      fields_.push_back(io::format_number(v));
      return *this;
    }
    template <typename I>
      requires std::is_integral_v<I>
    Row& operator<<(I v) {
      fields_.push_back(std::to_string(v));
      return *this;
    }

   private:
    Csv& csv_;
    std::vector<std::string> fields_;
  };

  Row row() { return Row(*this); }
  const std::string& str() const { return text_; }
  std::size_t columns() const { return header_.size(); }

 private:
  void append(const std::vector<std::string>& fields) {
    if (fields.size() != header_.size()) {
      throw Error(ErrorCode::Internal, "CSV row has " + std::to_string(fields.size()) + " fields, expected " +
                                           std::to_string(header_.size()));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) text_ += ',';
      text_ += csv_escape(fields[i]);
    }
    text_ += '\n';
  }

  std::vector<std::string> header_;
  std::string text_;
};

// ---------------------------------------------------------------------------
// Digests

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Internal, "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xF];
  }
  return out;
}

inline std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(io::read_file(path)); }

// ---------------------------------------------------------------------------
// SVG helpers

/// Fixed two-decimal coordinates keep SVG output identical across platforms.
inline std::string fixed2(double v) {
  if (std::fabs(v) < 0.005) return "0";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, 2);
  std::string s(buf.data(), res.ptr);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Rgb {
  int r, g, b;
};

inline std::string hex_colour(Rgb c) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out = "#";
  for (int v : {c.r, c.g, c.b}) {
    out += kHex[(v >> 4) & 0xF];
    out += kHex[v & 0xF];
  }
  return out;
}

/// Blue-white-red diverging palette; `t` is clamped to [-1, 1].
inline Rgb diverging_colour(double t) {
  constexpr Rgb kNeg{33, 102, 172}, kMid{247, 247, 247}, kPos{178, 24, 43};
  if (!std::isfinite(t)) return kMid;
  t = std::clamp(t, -1.0, 1.0);
  const Rgb& end = t < 0.0 ? kNeg : kPos;
  const double a = std::fabs(t);
  auto mix = [a](int m, int e) { return static_cast<int>(std::lround(m + a * (e - m))); };
  return {mix(kMid.r, end.r), mix(kMid.g, end.g), mix(kMid.b, end.b)};
}

inline std::string metric_unit(CueMetric m) { return m == CueMetric::Itd ? "us" : "dB"; }

// ---------------------------------------------------------------------------
// Spatial heatmap

/// Azimuth runs left to right over [0, 360), elevation top to bottom from
/// +90 to -90. Poles span the full row. Frame width encodes the significance
/// tier: 1 for p < 0.05, 2 for p < 0.01, 3 for p < 0.001.
inline std::string heatmap_svg(const SpatialGridSummary& s, std::string_view title) {
  constexpr double kCell = 36.0, kLeft = 56.0, kTop = 40.0, kLegend = 60.0;
  std::vector<double> azimuths, elevations;
  for (const auto& n : s.nodes) {
    if (!n.position.is_pole()) azimuths.push_back(n.position.azimuth_deg());
    elevations.push_back(n.position.elevation_deg());
  }
  std::sort(azimuths.begin(), azimuths.end());
  azimuths.erase(std::unique(azimuths.begin(), azimuths.end()), azimuths.end());
  std::sort(elevations.begin(), elevations.end(), std::greater<>());
  elevations.erase(std::unique(elevations.begin(), elevations.end()), elevations.end());
  const std::size_t cols = std::max<std::size_t>(azimuths.size(), 1);
  const double width = kLeft + kCell * static_cast<double>(cols) + 16.0;
  const double height = kTop + kCell * static_cast<double>(elevations.size()) + kLegend;

  double vmax = 0.0;
  for (const auto& n : s.nodes) {
    if (n.status == NodeStatus::Tested && std::isfinite(n.mean_difference)) vmax = std::max(vmax, std::fabs(n.mean_difference));
  }

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed2(width) << "\" height=\"" << fixed2(height)
    << "\" viewBox=\"0 0 " << fixed2(width) << ' ' << fixed2(height) << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  o << "<title>" << xml_escape(title) << "</title>\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  o << "<text x=\"" << fixed2(kLeft) << "\" y=\"16\" font-size=\"12\">" << xml_escape(title) << " (" << to_string(s.metric)
    << ", signed mean difference)</text>\n";

  auto row_of = [&](double el) {
    return static_cast<std::size_t>(std::find(elevations.begin(), elevations.end(), el) - elevations.begin());
  };
  auto col_of = [&](double az) {
    return static_cast<std::size_t>(std::lower_bound(azimuths.begin(), azimuths.end(), az) - azimuths.begin());
  };

  std::ostringstream frames;
  for (const auto& n : s.nodes) {
    const double y = kTop + kCell * static_cast<double>(row_of(n.position.elevation_deg()));
    const bool pole = n.position.is_pole();
    const double x = pole ? kLeft : kLeft + kCell * static_cast<double>(col_of(n.position.azimuth_deg()));
    const double w = pole ? kCell * static_cast<double>(cols) : kCell;
    std::string fill = "#e0e0e0";
    if (n.status == NodeStatus::Tested) {
      fill = hex_colour(diverging_colour(vmax > 0.0 ? n.mean_difference / vmax : 0.0));
    } else if (n.status == NodeStatus::InsufficientSubjects) {
      fill = "#c0c0c0";
    }
    o << "<rect x=\"" << fixed2(x) << "\" y=\"" << fixed2(y) << "\" width=\"" << fixed2(w) << "\" height=\""
      << fixed2(kCell) << "\" fill=\"" << fill << "\" stroke=\"#ffffff\" stroke-width=\"0.5\">"
      << "<title>az " << io::format_number(n.position.azimuth_deg()) << " el "
      << io::format_number(n.position.elevation_deg()) << ": " << io::format_number(n.mean_difference) << ' '
      << metric_unit(s.metric) << ", p_adj " << io::format_number(n.p_adjusted) << "</title></rect>\n";
    if (n.significant && n.tier > 0) {
      const double sw = static_cast<double>(n.tier);
      const double inset = sw / 2.0;
      frames << "<rect x=\"" << fixed2(x + inset) << "\" y=\"" << fixed2(y + inset) << "\" width=\""
             << fixed2(w - sw) << "\" height=\"" << fixed2(kCell - sw) << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\""
             << n.tier << "\"/>\n";
    }
  }
  o << frames.str();

  for (std::size_t c = 0; c < azimuths.size(); ++c) {
    o << "<text x=\"" << fixed2(kLeft + kCell * (static_cast<double>(c) + 0.5)) << "\" y=\"" << fixed2(kTop - 4.0)
      << "\" text-anchor=\"middle\">" << io::format_number(azimuths[c]) << "</text>\n";
  }
  for (std::size_t r = 0; r < elevations.size(); ++r) {
    o << "<text x=\"" << fixed2(kLeft - 6.0) << "\" y=\"" << fixed2(kTop + kCell * (static_cast<double>(r) + 0.5) + 3.0)
      << "\" text-anchor=\"end\">" << io::format_number(elevations[r]) << "</text>\n";
  }

  const double ly = kTop + kCell * static_cast<double>(elevations.size()) + 14.0;
  constexpr int kSteps = 11;
  for (int i = 0; i < kSteps; ++i) {
    const double t = -1.0 + 2.0 * i / (kSteps - 1);
    o << "<rect x=\"" << fixed2(kLeft + 14.0 * i) << "\" y=\"" << fixed2(ly) << "\" width=\"14\" height=\"10\" fill=\""
      << hex_colour(diverging_colour(t)) << "\"/>\n";
  }
  o << "<text x=\"" << fixed2(kLeft) << "\" y=\"" << fixed2(ly + 22.0) << "\">-" << io::format_number(vmax) << ' '
    << metric_unit(s.metric) << "</text>\n";
  o << "<text x=\"" << fixed2(kLeft + 14.0 * kSteps) << "\" y=\"" << fixed2(ly + 22.0) << "\" text-anchor=\"end\">+"
    << io::format_number(vmax) << ' ' << metric_unit(s.metric) << "</text>\n";
  o << "<text x=\"" << fixed2(kLeft + 14.0 * kSteps + 12.0) << "\" y=\"" << fixed2(ly + 9.0)
    << "\">frame 1/2/3: p &lt; 0.05/0.01/0.001 (adjusted)</text>\n";
  o << "</svg>\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Frequency curves

struct CurveSeries {
  std::string name;
  const FrequencyLsdCurve* curve;
};

/// Mean LSD per frequency bin for each condition, plus one bar row per
/// condition pair showing significant clusters (adjusted p < alpha).
inline std::string frequency_svg(std::span<const CurveSeries> series,
                                 std::span<const std::pair<std::string, stats::ClusterResult>> clusters,
                                 std::string_view title) {
  constexpr double kLeft = 56.0, kTop = 30.0, kPlotW = 560.0, kPlotH = 240.0, kBarH = 12.0;
  static constexpr std::array<const char*, 6> kPalette{"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};
  double fmin = 0.0, fmax = 1.0, ymax = 1.0;
  bool first = true;
  for (const auto& s : series) {
    if (!s.curve || s.curve->freq_bins_hz.empty()) continue;
    if (first) {
      fmin = s.curve->freq_bins_hz.front();
      fmax = s.curve->freq_bins_hz.back();
      first = false;
    }
    fmin = std::min(fmin, s.curve->freq_bins_hz.front());
    fmax = std::max(fmax, s.curve->freq_bins_hz.back());
    for (double v : s.curve->mean_db) {
      if (std::isfinite(v)) ymax = std::max(ymax, v);
    }
  }
  if (fmax <= fmin) fmax = fmin + 1.0;
  ymax = std::ceil(ymax);
  const double bars_top = kTop + kPlotH + 30.0;
  const double height = bars_top + kBarH * 1.5 * static_cast<double>(clusters.size()) + 30.0 + 14.0 * series.size();
  const double width = kLeft + kPlotW + 180.0;
  auto px = [&](double f) { return kLeft + (f - fmin) / (fmax - fmin) * kPlotW; };
  auto py = [&](double v) { return kTop + kPlotH - v / ymax * kPlotH; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed2(width) << "\" height=\"" << fixed2(height)
    << "\" viewBox=\"0 0 " << fixed2(width) << ' ' << fixed2(height) << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  o << "<title>" << xml_escape(title) << "</title>\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  o << "<text x=\"" << fixed2(kLeft) << "\" y=\"16\" font-size=\"12\">" << xml_escape(title) << "</text>\n";
  o << "<rect x=\"" << fixed2(kLeft) << "\" y=\"" << fixed2(kTop) << "\" width=\"" << fixed2(kPlotW) << "\" height=\""
    << fixed2(kPlotH) << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"0.5\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = ymax * i / 4.0;
    o << "<text x=\"" << fixed2(kLeft - 4.0) << "\" y=\"" << fixed2(py(v) + 3.0) << "\" text-anchor=\"end\">"
      << io::format_number(v) << "</text>\n";
    const double f = fmin + (fmax - fmin) * i / 4.0;
    o << "<text x=\"" << fixed2(px(f)) << "\" y=\"" << fixed2(kTop + kPlotH + 12.0) << "\" text-anchor=\"middle\">"
      << io::format_number(std::round(f)) << "</text>\n";
  }
  o << "<text x=\"" << fixed2(kLeft + kPlotW / 2.0) << "\" y=\"" << fixed2(kTop + kPlotH + 24.0)
    << "\" text-anchor=\"middle\">frequency (Hz)</text>\n";
  o << "<text x=\"12\" y=\"" << fixed2(kTop + kPlotH / 2.0) << "\" transform=\"rotate(-90 12 "
    << fixed2(kTop + kPlotH / 2.0) << ")\" text-anchor=\"middle\">LSD (dB)</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    if (!s.curve) continue;
    const char* colour = kPalette[i % kPalette.size()];
    o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.curve->freq_bins_hz.size(); ++k) {
      if (k) o << ' ';
      o << fixed2(px(s.curve->freq_bins_hz[k])) << ',' << fixed2(py(std::isfinite(s.curve->mean_db[k]) ? s.curve->mean_db[k] : 0.0));
    }
    o << "\"/>\n";
    const double ly = kTop + 12.0 + 14.0 * static_cast<double>(i);
    o << "<line x1=\"" << fixed2(kLeft + kPlotW + 12.0) << "\" y1=\"" << fixed2(ly - 3.0) << "\" x2=\""
      << fixed2(kLeft + kPlotW + 28.0) << "\" y2=\"" << fixed2(ly - 3.0) << "\" stroke=\"" << colour
      << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << fixed2(kLeft + kPlotW + 32.0) << "\" y=\"" << fixed2(ly) << "\">" << xml_escape(s.name)
      << "</text>\n";
  }

  const FrequencyLsdCurve* axis = nullptr;
  for (const auto& s : series) {
    if (s.curve && !s.curve->freq_bins_hz.empty()) {
      axis = s.curve;
      break;
    }
  }
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const double y = bars_top + kBarH * 1.5 * static_cast<double>(c);
    o << "<text x=\"" << fixed2(kLeft + kPlotW + 12.0) << "\" y=\"" << fixed2(y + kBarH - 2.0) << "\">"
      << xml_escape(clusters[c].first) << "</text>\n";
    o << "<line x1=\"" << fixed2(kLeft) << "\" y1=\"" << fixed2(y + kBarH / 2.0) << "\" x2=\"" << fixed2(kLeft + kPlotW)
      << "\" y2=\"" << fixed2(y + kBarH / 2.0) << "\" stroke=\"#d0d0d0\" stroke-width=\"0.5\"/>\n";
    if (!axis) continue;
    const auto& res = clusters[c].second;
    const double half_bin = axis->freq_bins_hz.size() > 1 ? (axis->freq_bins_hz[1] - axis->freq_bins_hz[0]) / 2.0 : 0.5;
    for (const auto& cl : res.clusters) {
      if (!(cl.p_adjusted < res.alpha_cluster) || cl.last_bin >= axis->freq_bins_hz.size()) continue;
      const double x0 = px(std::max(fmin, axis->freq_bins_hz[cl.first_bin] - half_bin));
      const double x1 = px(std::min(fmax, axis->freq_bins_hz[cl.last_bin] + half_bin));
      const char* fill = cl.higher == stats::HigherCondition::A ? "#b2182b" : "#2166ac";
      o << "<rect x=\"" << fixed2(x0) << "\" y=\"" << fixed2(y) << "\" width=\"" << fixed2(std::max(x1 - x0, 1.0))
        << "\" height=\"" << fixed2(kBarH) << "\" fill=\"" << fill << "\"><title>bins " << cl.first_bin << '-'
        << cl.last_bin << ", p_adj " << io::format_number(cl.p_adjusted) << "</title></rect>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace hrtfeval::report
