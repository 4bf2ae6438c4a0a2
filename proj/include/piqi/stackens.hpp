#pragma once

// Bagged GPR members over random row/feature subsets, combined by forward
// stepwise least-squares stacking on a validation set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "piqi/error.hpp"
#include "piqi/gpr.hpp"
#include "piqi/parallel.hpp"
#include "piqi/rng.hpp"

namespace piqi {

struct BagConfig {
  std::size_t n_members = 100;
  double row_fraction = 0.8;
  double feature_fraction = 0.5;
  std::uint64_t master_seed = 0;
  int tune_budget = 60;
  int jobs = 1;  // scheduling only; never affects results
};

struct MemberSpec {
  std::uint64_t seed = 0;
  std::vector<std::size_t> row_indices;
  std::vector<std::size_t> feature_indices;
  GprModel model;
  bool warning = false;
};

struct StackedEnsemble {
  std::vector<MemberSpec> members;
  std::vector<std::size_t> selected;
  double intercept = 0.0;
  std::vector<double> weights;
  std::string layout_version;
  std::size_t input_dim = 0;
  // (members included, validation RMSE); entry 0 is the intercept-only fit.
  std::vector<std::pair<std::size_t, double>> curve;
};

inline constexpr double kStackingRelTol = 1e-4;

/// Starting hyperparameters for a member with `dim` standardized features.
inline KernelParams default_member_params(std::size_t dim) {
  return {std::sqrt(static_cast<double>(std::max<std::size_t>(dim, 1))), 1.0, 0.1};
}

inline std::uint64_t member_seed(std::uint64_t master_seed, std::uint64_t member,
                                 std::uint64_t attempt = 0) {
  return derive_seed(master_seed, member, attempt);
}

namespace detail {

inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                           std::mt19937_64& eng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(eng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline Eigen::MatrixXd take(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows,
                            const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          x(static_cast<Eigen::Index>(rows[i]), static_cast<Eigen::Index>(cols[j]));
    }
  }
  return out;
}

inline MemberSpec train_member(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const BagConfig& cfg, std::uint64_t seed,
                               const KernelParams* preset) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  const auto n_rows = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(cfg.row_fraction * static_cast<double>(n) - 1e-9)), 2, n);
  const auto n_feats = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(cfg.feature_fraction * static_cast<double>(d) - 1e-9)), 1, d);

  std::mt19937_64 eng(seed);
  MemberSpec m;
  m.seed = seed;
  m.row_indices = sample_without_replacement(n, n_rows, eng);
  m.feature_indices = sample_without_replacement(d, n_feats, eng);

  const Eigen::MatrixXd xs = take(x, m.row_indices, m.feature_indices);
  Eigen::VectorXd ys(static_cast<Eigen::Index>(n_rows));
  for (std::size_t i = 0; i < n_rows; ++i) ys(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(m.row_indices[i]));

  KernelParams params = preset ? *preset : default_member_params(n_feats);
  if (!preset && cfg.tune_budget > 1) {
    const auto tuned = tune_hyperparams(xs, ys, params, cfg.tune_budget);
    params = tuned.params;
    m.warning = tuned.warning;
  }
  m.model = fit(xs, ys, params);
  return m;
}

}  // namespace detail

/// Trains `cfg.n_members` GPR members. Member m uses a seed derived from
/// (master_seed, m); a member whose fit is ill-conditioned is redrawn once
/// with a fresh seed and, failing that, refit with a raised noise floor and
/// flagged. Pass `presets` (one per member) to skip tuning.
inline std::vector<MemberSpec> bag_train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                         const BagConfig& cfg,
                                         const std::vector<KernelParams>* presets = nullptr) {
  if (x.rows() < 10) throw InvalidArgument("bag_train: need at least 10 training rows");
  if (x.rows() != y.size()) throw InvalidArgument("bag_train: X rows and y length differ");
  if (x.cols() < 1) throw InvalidArgument("bag_train: no feature columns");
  if (!(cfg.row_fraction > 0.0 && cfg.row_fraction <= 1.0) ||
      !(cfg.feature_fraction > 0.0 && cfg.feature_fraction <= 1.0)) {
    throw InvalidArgument("bag_train: fractions must lie in (0, 1]");
  }
  if (cfg.n_members < 1) throw InvalidArgument("bag_train: n_members must be >= 1");
  if (presets && presets->size() != cfg.n_members) {
    throw InvalidArgument("bag_train: preset count does not match n_members");
  }

  std::vector<MemberSpec> members(cfg.n_members);
  parallel_for(cfg.n_members, cfg.jobs, [&](std::size_t i) {
    const KernelParams* preset = presets ? &(*presets)[i] : nullptr;
    try {
      members[i] = detail::train_member(x, y, cfg, member_seed(cfg.master_seed, i), preset);
      return;
    } catch (const IllConditioned&) {
    }
    const std::uint64_t retry_seed = member_seed(cfg.master_seed, i, 1);
    try {
      members[i] = detail::train_member(x, y, cfg, retry_seed, preset);
      members[i].warning = true;
    } catch (const IllConditioned&) {
      BagConfig fallback = cfg;
      fallback.tune_budget = 1;
      const auto d = static_cast<double>(x.cols());
      KernelParams p = preset ? *preset
                              : default_member_params(static_cast<std::size_t>(
                                    std::ceil(cfg.feature_fraction * d - 1e-9)));
      p.noise_variance = std::max(p.noise_variance, 1e-2);
      members[i] = detail::train_member(x, y, fallback, retry_seed, &p);
      members[i].warning = true;
    }
  });
  return members;
}

inline double member_predict(const MemberSpec& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd sub(static_cast<Eigen::Index>(m.feature_indices.size()));
  for (std::size_t j = 0; j < m.feature_indices.size(); ++j) {
    const auto f = static_cast<Eigen::Index>(m.feature_indices[j]);
    if (f >= x.size()) throw InvalidArgument("member_predict: query is too short");
    sub(static_cast<Eigen::Index>(j)) = x(f);
  }
  return predict(m.model, sub).mean;
}

/// v x M matrix of member predictions for each row of `x`.
inline Eigen::MatrixXd member_predictions(const std::vector<MemberSpec>& members,
                                          const Eigen::MatrixXd& x, int jobs = 1) {
  Eigen::MatrixXd p(x.rows(), static_cast<Eigen::Index>(members.size()));
  parallel_for(members.size(), jobs, [&](std::size_t j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      p(i, static_cast<Eigen::Index>(j)) = member_predict(members[j], x.row(i).transpose());
    }
  });
  return p;
}

struct Selection {
  std::vector<std::size_t> selected;
  double intercept = 0.0;
  std::vector<double> weights;
  std::vector<std::pair<std::size_t, double>> curve;
};

namespace detail {

struct OlsFit {
  Eigen::VectorXd coef;  // intercept first
  double rmse = 0.0;
};

inline std::optional<OlsFit> ols(const Eigen::MatrixXd& preds, const std::vector<std::size_t>& cols,
                                 const Eigen::VectorXd& y) {
  const Eigen::Index v = preds.rows();
  const auto k = static_cast<Eigen::Index>(cols.size()) + 1;
  if (k > v) return std::nullopt;
  Eigen::MatrixXd a(v, k);
  a.col(0).setOnes();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    a.col(static_cast<Eigen::Index>(j) + 1) = preds.col(static_cast<Eigen::Index>(cols[j]));
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < k) return std::nullopt;
  OlsFit f;
  f.coef = qr.solve(y);
  f.rmse = std::sqrt((a * f.coef - y).squaredNorm() / static_cast<double>(v));
  if (!std::isfinite(f.rmse)) return std::nullopt;
  return f;
}

}  // namespace detail

/// Forward stepwise selection over the columns of `preds` (validation
/// predictions). Each step adds the column that minimizes RMSE after a full
/// least-squares refit of intercept and all selected weights; rank-deficient
/// candidates are skipped. Stops when the relative RMSE improvement drops
/// below 1e-4.
inline Selection stepwise_select(const Eigen::MatrixXd& preds, const Eigen::VectorXd& y) {
  if (preds.rows() != y.size()) throw InvalidArgument("stepwise_select: row count mismatch");
  if (y.size() < 5) throw InvalidArgument("stepwise_select: need at least 5 validation rows");

  Selection s;
  const auto base = detail::ols(preds, {}, y);
  s.intercept = base->coef(0);
  double current = base->rmse;
  s.curve.emplace_back(0, current);
  const double scale = y.cwiseAbs().maxCoeff() + 1.0;

  std::vector<bool> used(static_cast<std::size_t>(preds.cols()), false);
  while (s.selected.size() < used.size() && current > 1e-12 * scale) {
    std::optional<detail::OlsFit> best;
    std::size_t best_col = 0;
    std::vector<std::size_t> trial = s.selected;
    trial.push_back(0);
    for (std::size_t c = 0; c < used.size(); ++c) {
      if (used[c]) continue;
      trial.back() = c;
      auto f = detail::ols(preds, trial, y);
      if (f && (!best || f->rmse < best->rmse)) {
        best = std::move(f);
        best_col = c;
      }
    }
    if (!best || (current - best->rmse) < kStackingRelTol * current) break;
    used[best_col] = true;
    s.selected.push_back(best_col);
    s.intercept = best->coef(0);
    s.weights.assign(best->coef.data() + 1, best->coef.data() + best->coef.size());
    current = best->rmse;
    s.curve.emplace_back(s.selected.size(), current);
  }
  return s;
}

inline StackedEnsemble stepwise_stack(std::vector<MemberSpec> members, const Eigen::MatrixXd& x_val,
                                      const Eigen::VectorXd& y_val, int jobs = 1) {
  if (x_val.rows() != y_val.size()) throw InvalidArgument("stepwise_stack: row count mismatch");
  if (y_val.size() < 5) throw InvalidArgument("stepwise_stack: need at least 5 validation rows");
  const Eigen::MatrixXd preds = member_predictions(members, x_val, jobs);
  Selection sel = stepwise_select(preds, y_val);
  StackedEnsemble e;
  e.members = std::move(members);
  e.selected = std::move(sel.selected);
  e.intercept = sel.intercept;
  e.weights = std::move(sel.weights);
  e.curve = std::move(sel.curve);
  e.input_dim = static_cast<std::size_t>(x_val.cols());
  return e;
}

inline double ensemble_predict(const StackedEnsemble& e, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (static_cast<std::size_t>(x.size()) != e.input_dim) {
    throw InvalidArgument("ensemble_predict: query has dimension " + std::to_string(x.size()) +
                          ", ensemble expects " + std::to_string(e.input_dim));
  }
  double out = e.intercept;
  for (std::size_t j = 0; j < e.selected.size(); ++j) {
    out += e.weights[j] * member_predict(e.members.at(e.selected[j]), x);
  }
  return out;
}

/// One prediction per row of `x`.
inline Eigen::VectorXd ensemble_predict_rows(const StackedEnsemble& e, const Eigen::MatrixXd& x) {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = ensemble_predict(e, x.row(i).transpose());
  return out;
}

inline const std::vector<std::pair<std::size_t, double>>& convergence_curve(const StackedEnsemble& e) {
  return e.curve;
}

}  // namespace piqi
