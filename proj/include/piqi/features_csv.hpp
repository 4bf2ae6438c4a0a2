#pragma once

// Feature dump: header `path,<layout entry names...>`, one image per row.

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "piqi/error.hpp"
#include "piqi/evalkit.hpp"
#include "piqi/featpipe.hpp"
#include "piqi/manifest.hpp"

namespace piqi {

struct FeatureTable {
  std::vector<std::string> paths;
  Eigen::MatrixXd features;
};

inline void write_features_csv(std::ostream& out, const std::vector<std::string>& paths,
                               const Eigen::MatrixXd& features) {
  if (features.cols() != static_cast<Eigen::Index>(kFeatureCount) ||
      features.rows() != static_cast<Eigen::Index>(paths.size())) {
    throw InvalidArgument("write_features_csv: expected one 192-wide row per path");
  }
  out << "path";
  for (const auto& e : layout().entries) out << ',' << e.name();
  out << '\n';
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out << paths[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < features.cols(); ++j) out << ',' << format_double(features(i, j));
    out << '\n';
  }
}

inline FeatureTable read_features_csv(std::istream& in) {
  FeatureTable t;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::vector<double>> rows;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv(line);
    if (!header) {
      if (cells.size() != kFeatureCount + 1 || cells[0] != "path") {
        throw ParseError("feature CSV header must be 'path' followed by 192 layout names", lineno);
      }
      for (std::size_t j = 0; j < kFeatureCount; ++j) {
        if (cells[j + 1] != layout().entries[j].name()) {
          throw ParseError("feature CSV column " + std::to_string(j + 1) + " is '" +
                               std::string(cells[j + 1]) + "', expected '" +
                               layout().entries[j].name() + "'",
                           lineno);
        }
      }
      header = true;
      continue;
    }
    if (cells.size() != kFeatureCount + 1) throw ParseError("feature CSV row has wrong width", lineno);
    std::vector<double> row(kFeatureCount);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      const auto v = detail::parse_double(cells[j + 1]);
      if (!v) throw ParseError("invalid feature value '" + std::string(cells[j + 1]) + "'", lineno);
      row[j] = *v;
    }
    t.paths.emplace_back(cells[0]);
    rows.push_back(std::move(row));
  }
  if (!header) throw ParseError("feature CSV is empty");
  t.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      t.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return t;
}

}  // namespace piqi
