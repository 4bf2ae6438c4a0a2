#pragma once

// Dataset manifests: CSV rows of (path, score[, group]) preceded by a
// `# key=value` metadata block.
//
//   # dataset_name=CSIQ
//   # score_min=0
//   # score_max=1
//   # polarity=higher-worse
//   path,score,group
//   dst/1600.AWGN.1.png,0.062,1600

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "piqi/error.hpp"

namespace piqi {

enum class Polarity { HigherBetter, HigherWorse };

inline std::string_view polarity_name(Polarity p) {
  return p == Polarity::HigherBetter ? "higher-better" : "higher-worse";
}

inline Polarity parse_polarity(std::string_view s) {
  if (s == "higher-better" || s == "mos") return Polarity::HigherBetter;
  if (s == "higher-worse" || s == "dmos") return Polarity::HigherWorse;
  throw InvalidArgument("unknown polarity '" + std::string(s) +
                        "' (expected higher-better or higher-worse)");
}

struct ManifestRow {
  std::filesystem::path path;
  double score = 0.0;
  std::string group;
};

struct DatasetManifest {
  std::string dataset_name;
  double score_min = 0.0;
  double score_max = 1.0;
  Polarity polarity = Polarity::HigherBetter;
  std::vector<ManifestRow> rows;

  std::size_t size() const noexcept { return rows.size(); }

  bool has_groups() const {
    return !rows.empty() &&
           std::all_of(rows.begin(), rows.end(), [](const auto& r) { return !r.group.empty(); });
  }

  std::vector<double> raw_scores() const {
    std::vector<double> s;
    s.reserve(rows.size());
    for (const auto& r : rows) s.push_back(r.score);
    return s;
  }

  std::vector<std::string> groups() const {
    std::vector<std::string> g;
    g.reserve(rows.size());
    for (const auto& r : rows) g.push_back(r.group);
    return g;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses manifest text. Relative image paths are resolved against `base_dir`.
inline DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir = {}) {
  DatasetManifest m;
  bool have_min = false, have_max = false, have_header = false;
  int group_col = -1;
  std::vector<std::size_t> row_lines;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const auto body = detail::trim(t.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;  // free-form comment
      const auto key = detail::trim(body.substr(0, eq));
      const auto value = detail::trim(body.substr(eq + 1));
      if (key == "dataset_name") {
        m.dataset_name = std::string(value);
      } else if (key == "score_min" || key == "score_max") {
        const auto v = detail::parse_double(value);
        if (!v) throw ParseError("invalid " + std::string(key) + " '" + std::string(value) + "'", lineno);
        (key == "score_min" ? m.score_min : m.score_max) = *v;
        (key == "score_min" ? have_min : have_max) = true;
      } else if (key == "polarity") {
        try {
          m.polarity = parse_polarity(value);
        } catch (const InvalidArgument& e) {
          throw ParseError(e.what(), lineno);
        }
      }
      continue;
    }
    const auto cells = detail::split_csv(t);
    if (!have_header) {
      if (cells.size() < 2 || cells[0] != "path" || cells[1] != "score") {
        throw ParseError("manifest header must start with 'path,score'", lineno);
      }
      for (std::size_t i = 2; i < cells.size(); ++i) {
        if (cells[i] == "group") group_col = static_cast<int>(i);
      }
      have_header = true;
      continue;
    }
    if (cells.size() < 2 || cells[0].empty()) throw ParseError("malformed manifest row", lineno);
    const auto score = detail::parse_double(cells[1]);
    if (!score) throw ParseError("invalid score '" + std::string(cells[1]) + "'", lineno);
    ManifestRow row;
    row.path = std::filesystem::path(std::string(cells[0]));
    if (row.path.is_relative() && !base_dir.empty()) row.path = base_dir / row.path;
    row.score = *score;
    if (group_col >= 0) {
      if (static_cast<std::size_t>(group_col) >= cells.size()) {
        throw ParseError("missing group column", lineno);
      }
      row.group = std::string(cells[static_cast<std::size_t>(group_col)]);
    }
    m.rows.push_back(std::move(row));
    row_lines.push_back(lineno);
  }
  if (!have_header) throw ParseError("manifest has no 'path,score' header");
  if (!have_min || !have_max) throw ParseError("manifest is missing score_min/score_max metadata");
  if (!(m.score_max > m.score_min)) throw ParseError("score_max must exceed score_min");
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    if (m.rows[i].score < m.score_min || m.rows[i].score > m.score_max) {
      throw ParseError("score outside [score_min, score_max]", row_lines[i]);
    }
  }
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  try {
    auto m = parse_manifest(in, path.parent_path());
    if (m.dataset_name.empty()) m.dataset_name = path.stem().string();
    return m;
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_manifest(std::ostream& out, const DatasetManifest& m) {
  out << "# dataset_name=" << m.dataset_name << '\n';
  out.precision(17);
  out << "# score_min=" << m.score_min << '\n';
  out << "# score_max=" << m.score_max << '\n';
  out << "# polarity=" << polarity_name(m.polarity) << '\n';
  const bool groups = m.has_groups();
  out << (groups ? "path,score,group\n" : "path,score\n");
  for (const auto& r : m.rows) {
    out << r.path.string() << ',' << r.score;
    if (groups) out << ',' << r.group;
    out << '\n';
  }
}

/// Maps raw scores affinely onto [0,1]; with `unify_polarity` set,
/// higher-worse scales are flipped so that 1 is always best.
inline std::vector<double> normalize_scores(const DatasetManifest& m, bool unify_polarity = false) {
  if (!(m.score_max > m.score_min)) throw InvalidArgument("normalize_scores: score_max == score_min");
  const double span = m.score_max - m.score_min;
  const bool flip = unify_polarity && m.polarity == Polarity::HigherWorse;
  std::vector<double> out;
  out.reserve(m.rows.size());
  for (const auto& r : m.rows) {
    const double s = (r.score - m.score_min) / span;
    out.push_back(flip ? 1.0 - s : s);
  }
  return out;
}

inline double denormalize_score(double s, double score_min, double score_max, bool flipped) {
  if (flipped) s = 1.0 - s;
  return score_min + s * (score_max - score_min);
}

}  // namespace piqi
