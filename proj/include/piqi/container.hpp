#pragma once

// Versioned single-file model container. All integers are little-endian
// u64 (u32 for the format version), all reals little-endian IEEE-754 binary64,
// matrices row-major with explicit dimensions:
//
//   "PIQI" u32:format_version str:layout_version
//   provenance: str:manifest_name u64:master_seed u64:n_members f64:row_fraction
//               f64:feature_fraction u64:tune_budget str:split_mode u64:unify_polarity
//               f64:score_min f64:score_max str:polarity
//   ensemble:   u64:input_dim f64:intercept idx:selected f64s:weights
//               u64:curve_len (u64:count f64:rmse)*  u64:member_count member*
//   member:     u64:seed u64:warning idx:rows idx:features gpr
//   gpr:        f64:length_scale f64:signal_variance f64:noise_variance f64:jitter
//               f64:target_mean f64:target_std f64s:feature_mean f64s:feature_std
//               mat:train_inputs f64s:weights u64:n (lower triangle of chol, row-major)
//
// where str = u64 length + bytes, idx = u64 count + u64 values,
// f64s = u64 count + f64 values, mat = u64 rows u64 cols + f64 values.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "piqi/binio.hpp"
#include "piqi/error.hpp"
#include "piqi/fsutil.hpp"
#include "piqi/manifest.hpp"
#include "piqi/stackens.hpp"

namespace piqi {

inline constexpr std::uint32_t kContainerVersion = 1;

struct TrainingProvenance {
  std::string manifest_name;
  std::uint64_t master_seed = 0;
  std::uint64_t n_members = 0;
  double row_fraction = 0.0;
  double feature_fraction = 0.0;
  std::uint64_t tune_budget = 0;
  std::string split_mode;
  bool unify_polarity = false;
  double score_min = 0.0;
  double score_max = 1.0;
  Polarity polarity = Polarity::HigherBetter;

  bool flipped() const noexcept { return unify_polarity && polarity == Polarity::HigherWorse; }
};

struct ModelContainer {
  std::uint32_t format_version = kContainerVersion;
  std::string layout_version;
  TrainingProvenance provenance;
  StackedEnsemble ensemble;
};

namespace detail {

inline void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  binio::put_u64(out, static_cast<std::uint64_t>(m.rows()));
  binio::put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) binio::put_f64(out, m(i, j));
  }
}

inline Eigen::MatrixXd get_matrix(std::istream& in) {
  const auto rows = binio::get_length(in, 1u << 24);
  const auto cols = binio::get_length(in, 1u << 24);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = binio::get_f64(in);
  }
  return m;
}

inline void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
  binio::put_f64s(out, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

inline Eigen::VectorXd get_vector(std::istream& in) {
  const auto v = binio::get_f64s(in);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline void put_gpr(std::ostream& out, const GprModel& m) {
  binio::put_f64(out, m.params.length_scale);
  binio::put_f64(out, m.params.signal_variance);
  binio::put_f64(out, m.params.noise_variance);
  binio::put_f64(out, m.jitter);
  binio::put_f64(out, m.target_mean);
  binio::put_f64(out, m.target_std);
  put_vector(out, m.feature_mean);
  put_vector(out, m.feature_std);
  put_matrix(out, m.train_inputs);
  put_vector(out, m.weights);
  binio::put_u64(out, static_cast<std::uint64_t>(m.chol.rows()));
  for (Eigen::Index i = 0; i < m.chol.rows(); ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) binio::put_f64(out, m.chol(i, j));
  }
}

inline GprModel get_gpr(std::istream& in) {
  GprModel m;
  m.params.length_scale = binio::get_f64(in);
  m.params.signal_variance = binio::get_f64(in);
  m.params.noise_variance = binio::get_f64(in);
  m.jitter = binio::get_f64(in);
  m.target_mean = binio::get_f64(in);
  m.target_std = binio::get_f64(in);
  m.feature_mean = get_vector(in);
  m.feature_std = get_vector(in);
  m.train_inputs = get_matrix(in);
  m.weights = get_vector(in);
  const auto n = static_cast<Eigen::Index>(binio::get_length(in, 1u << 24));
  m.chol = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) m.chol(i, j) = binio::get_f64(in);
  }
  const auto rows = m.train_inputs.rows(), cols = m.train_inputs.cols();
  if (m.weights.size() != rows || n != rows || m.feature_mean.size() != cols ||
      m.feature_std.size() != cols) {
    throw ParseError("model container: inconsistent GPR member dimensions");
  }
  return m;
}

}  // namespace detail

inline void save_model(std::ostream& out, const ModelContainer& c) {
  out.write("PIQI", 4);
  binio::put_u32(out, c.format_version);
  binio::put_string(out, c.layout_version);

  const auto& p = c.provenance;
  binio::put_string(out, p.manifest_name);
  binio::put_u64(out, p.master_seed);
  binio::put_u64(out, p.n_members);
  binio::put_f64(out, p.row_fraction);
  binio::put_f64(out, p.feature_fraction);
  binio::put_u64(out, p.tune_budget);
  binio::put_string(out, p.split_mode);
  binio::put_u64(out, p.unify_polarity ? 1 : 0);
  binio::put_f64(out, p.score_min);
  binio::put_f64(out, p.score_max);
  binio::put_string(out, std::string(polarity_name(p.polarity)));

  const auto& e = c.ensemble;
  binio::put_u64(out, e.input_dim);
  binio::put_f64(out, e.intercept);
  binio::put_indices(out, e.selected);
  binio::put_f64s(out, e.weights);
  binio::put_u64(out, e.curve.size());
  for (const auto& [count, value] : e.curve) {
    binio::put_u64(out, count);
    binio::put_f64(out, value);
  }
  binio::put_u64(out, e.members.size());
  for (const auto& m : e.members) {
    binio::put_u64(out, m.seed);
    binio::put_u64(out, m.warning ? 1 : 0);
    binio::put_indices(out, m.row_indices);
    binio::put_indices(out, m.feature_indices);
    detail::put_gpr(out, m.model);
  }
}

inline ModelContainer load_model(std::istream& in) {
  char magic[4];
  binio::read_exact(in, magic, 4);
  if (std::string(magic, 4) != "PIQI") throw ParseError("not a PIQI model container");
  ModelContainer c;
  c.format_version = binio::get_u32(in);
  if (c.format_version != kContainerVersion) {
    throw ParseError("unsupported container version " + std::to_string(c.format_version));
  }
  c.layout_version = binio::get_string(in);

  auto& p = c.provenance;
  p.manifest_name = binio::get_string(in);
  p.master_seed = binio::get_u64(in);
  p.n_members = binio::get_u64(in);
  p.row_fraction = binio::get_f64(in);
  p.feature_fraction = binio::get_f64(in);
  p.tune_budget = binio::get_u64(in);
  p.split_mode = binio::get_string(in);
  p.unify_polarity = binio::get_u64(in) != 0;
  p.score_min = binio::get_f64(in);
  p.score_max = binio::get_f64(in);
  p.polarity = parse_polarity(binio::get_string(in));

  auto& e = c.ensemble;
  e.layout_version = c.layout_version;
  e.input_dim = static_cast<std::size_t>(binio::get_u64(in));
  e.intercept = binio::get_f64(in);
  e.selected = binio::get_indices(in);
  e.weights = binio::get_f64s(in);
  const auto curve_len = binio::get_length(in, 1u << 20);
  for (std::size_t i = 0; i < curve_len; ++i) {
    const auto count = static_cast<std::size_t>(binio::get_u64(in));
    e.curve.emplace_back(count, binio::get_f64(in));
  }
  const auto n_members = binio::get_length(in, 1u << 20);
  e.members.resize(n_members);
  for (auto& m : e.members) {
    m.seed = binio::get_u64(in);
    m.warning = binio::get_u64(in) != 0;
    m.row_indices = binio::get_indices(in);
    m.feature_indices = binio::get_indices(in);
    m.model = detail::get_gpr(in);
    if (m.feature_indices.size() != static_cast<std::size_t>(m.model.dim())) {
      throw ParseError("model container: member feature count does not match its GPR");
    }
    for (auto f : m.feature_indices) {
      if (f >= e.input_dim) throw ParseError("model container: feature index out of range");
    }
  }
  if (e.selected.size() != e.weights.size()) {
    throw ParseError("model container: selected/weights length mismatch");
  }
  for (auto s : e.selected) {
    if (s >= e.members.size()) throw ParseError("model container: selected index out of range");
  }
  return c;
}

inline void save_model_file(const std::filesystem::path& path, const ModelContainer& c) {
  write_atomically(path, [&](std::ostream& out) { save_model(out, c); }, true);
}

inline ModelContainer load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model " + path.string());
  try {
    return load_model(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace piqi
