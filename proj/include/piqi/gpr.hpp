#pragma once

// Exact Gaussian-process regression with an isotropic Matern-5/2 kernel.
//
// Inputs are z-scored per column and targets are z-scored before fitting, so
// kernel hyperparameters are expressed in standardized units.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "piqi/error.hpp"

namespace piqi {

inline constexpr double kNoiseFloor = 1e-10;
inline constexpr double kStdFloor = 1e-12;
inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterLimit = 1e-4;

struct KernelParams {
  double length_scale = 1.0;
  double signal_variance = 1.0;
  double noise_variance = 1e-2;

  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

inline double matern52(double r, double length_scale, double signal_variance) {
  if (!(length_scale > 0.0) || !(signal_variance > 0.0)) {
    throw InvalidArgument("matern52: length scale and signal variance must be positive");
  }
  if (!(r >= 0.0)) throw InvalidArgument("matern52: distance must be non-negative");
  const double s = std::sqrt(5.0) * r / length_scale;
  return signal_variance * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

struct GprModel {
  KernelParams params;
  Eigen::MatrixXd train_inputs;  // standardized, n x d
  Eigen::VectorXd weights;       // (K + noise I)^-1 y, standardized targets
  Eigen::MatrixXd chol;          // lower-triangular factor of K + (noise + jitter) I
  double jitter = 0.0;
  double target_mean = 0.0;
  double target_std = 1.0;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_std;

  Eigen::Index dim() const noexcept { return train_inputs.cols(); }
  Eigen::Index size() const noexcept { return train_inputs.rows(); }
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

namespace detail {

inline void validate_params(const KernelParams& p) {
  if (!(p.length_scale > 0.0) || !(p.signal_variance > 0.0) || !(p.noise_variance >= 0.0) ||
      !std::isfinite(p.length_scale) || !std::isfinite(p.signal_variance) ||
      !std::isfinite(p.noise_variance)) {
    throw InvalidArgument("invalid kernel hyperparameters");
  }
}

inline KernelParams floored(KernelParams p) {
  p.noise_variance = std::max(p.noise_variance, kNoiseFloor);
  return p;
}

struct Standardized {
  Eigen::MatrixXd z;
  Eigen::VectorXd y;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_std;
  double target_mean = 0.0;
  double target_std = 1.0;
};

inline Standardized standardize(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() < 2) throw InvalidArgument("GPR needs at least 2 training rows");
  if (x.rows() != y.size()) throw InvalidArgument("GPR: X rows and y length differ");
  if (!x.allFinite() || !y.allFinite()) throw InvalidArgument("GPR: non-finite training data");
  const double n = static_cast<double>(x.rows());
  Standardized s;
  s.feature_mean = x.colwise().mean().transpose();
  s.feature_std.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.feature_mean(j)).square().sum() / n;
    s.feature_std(j) = std::max(std::sqrt(var), kStdFloor);
  }
  s.z = (x.rowwise() - s.feature_mean.transpose()).array().rowwise() /
        s.feature_std.transpose().array();
  s.target_mean = y.mean();
  s.target_std = std::max(std::sqrt((y.array() - s.target_mean).square().sum() / n), kStdFloor);
  s.y = (y.array() - s.target_mean) / s.target_std;
  return s;
}

inline Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& z) {
  const Eigen::Index n = z.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (z.row(i) - z.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& dist, const KernelParams& p) {
  return dist.unaryExpr(
      [&](double r) { return matern52(r, p.length_scale, p.signal_variance); });
}

struct Factor {
  Eigen::MatrixXd lower;
  double jitter = 0.0;
};

/// Cholesky of K + noise I. On failure, jitter starts at 1e-10 of the mean
/// diagonal and doubles up to 1e-4 of it.
inline std::optional<Factor> factorize(const Eigen::MatrixXd& k, double noise) {
  Eigen::MatrixXd a = k;
  a.diagonal().array() += noise;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return Factor{llt.matrixL(), 0.0};
  const double mean_diag = a.diagonal().mean();
  for (double j = kJitterStart * mean_diag; j <= kJitterLimit * mean_diag; j *= 2.0) {
    Eigen::MatrixXd b = a;
    b.diagonal().array() += j;
    llt.compute(b);
    if (llt.info() == Eigen::Success) return Factor{llt.matrixL(), j};
  }
  return std::nullopt;
}

// Negative log marginal likelihood in standardized units; nullopt when the
// kernel matrix cannot be factorized.
inline std::optional<double> nlml(const Eigen::MatrixXd& dist, const Eigen::VectorXd& y,
                                  const KernelParams& p) {
  const auto f = factorize(kernel_matrix(dist, p), p.noise_variance);
  if (!f) return std::nullopt;
  const auto tri = f->lower.triangularView<Eigen::Lower>();
  const Eigen::VectorXd a = tri.solve(y);
  const double logdet = f->lower.diagonal().array().log().sum();
  const double v = 0.5 * a.squaredNorm() + logdet +
                   0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

inline GprModel fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const KernelParams& params) {
  detail::validate_params(params);
  auto s = detail::standardize(x, y);
  GprModel m;
  m.params = detail::floored(params);
  const auto f = detail::factorize(
      detail::kernel_matrix(detail::pairwise_distances(s.z), m.params), m.params.noise_variance);
  if (!f) {
    throw IllConditioned("GPR kernel matrix is ill-conditioned (length_scale=" +
                         std::to_string(m.params.length_scale) + ")");
  }
  m.chol = f->lower;
  m.jitter = f->jitter;
  const Eigen::VectorXd half = m.chol.triangularView<Eigen::Lower>().solve(s.y);
  m.weights = m.chol.transpose().triangularView<Eigen::Upper>().solve(half);
  m.train_inputs = std::move(s.z);
  m.feature_mean = std::move(s.feature_mean);
  m.feature_std = std::move(s.feature_std);
  m.target_mean = s.target_mean;
  m.target_std = s.target_std;
  return m;
}

inline Prediction predict(const GprModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != m.dim()) {
    throw InvalidArgument("predict: query has dimension " + std::to_string(x.size()) +
                          ", model expects " + std::to_string(m.dim()));
  }
  const Eigen::VectorXd z = (x - m.feature_mean).array() / m.feature_std.array();
  Eigen::VectorXd ks(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    ks(i) = matern52((m.train_inputs.row(i).transpose() - z).norm(), m.params.length_scale,
                     m.params.signal_variance);
  }
  const Eigen::VectorXd v = m.chol.triangularView<Eigen::Lower>().solve(ks);
  const double mean_z = ks.dot(m.weights);
  const double var_z =
      std::max(0.0, m.params.signal_variance - v.squaredNorm() + m.params.noise_variance);
  return {m.target_mean + m.target_std * mean_z, var_z * m.target_std * m.target_std};
}

/// NLML of `params` on (x, y) after the same standardization `fit` applies.
inline std::optional<double> negative_log_marginal_likelihood(const Eigen::MatrixXd& x,
                                                              const Eigen::VectorXd& y,
                                                              const KernelParams& params) {
  detail::validate_params(params);
  const auto s = detail::standardize(x, y);
  return detail::nlml(detail::pairwise_distances(s.z), s.y, detail::floored(params));
}

struct TuneResult {
  KernelParams params;
  double nlml = std::numeric_limits<double>::infinity();
  double initial_nlml = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool warning = false;  // every evaluation was ill-conditioned
};

/// Type-II maximum likelihood by multi-start coordinate search in log space.
///
/// The first evaluation is `init`; two length-scale restarts (x1/4, x4) pick the
/// starting point, then each log-parameter is stepped by +-step, halving the
/// step after a sweep without improvement. `budget` caps NLML evaluations.
/// The result never has a larger NLML than `init`.
inline TuneResult tune_hyperparams(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                   const KernelParams& init, int budget = 60) {
  if (budget < 1) throw InvalidArgument("tune_hyperparams: budget must be >= 1");
  detail::validate_params(init);
  const auto s = detail::standardize(x, y);
  const Eigen::MatrixXd dist = detail::pairwise_distances(s.z);

  static constexpr std::array<double, 3> lo = {-4.6, -6.9, -23.0};  // ln of 1e-2, 1e-3, 1e-10
  static constexpr std::array<double, 3> hi = {6.9, 6.9, 2.3};      // ln of 1e3, 1e3, 10

  auto to_params = [](const std::array<double, 3>& t) {
    return KernelParams{std::exp(t[0]), std::exp(t[1]), std::exp(t[2])};
  };

  TuneResult out;
  out.params = init;
  const auto first = detail::nlml(dist, s.y, detail::floored(init));
  out.evaluations = 1;
  out.initial_nlml = first.value_or(std::numeric_limits<double>::infinity());
  out.nlml = out.initial_nlml;

  const KernelParams start = detail::floored(init);
  std::array<double, 3> best = {std::log(start.length_scale), std::log(start.signal_variance),
                                std::log(start.noise_variance)};
  for (int i = 0; i < 3; ++i) best[i] = std::clamp(best[i], lo[i], hi[i]);
  bool any_ok = first.has_value();

  auto try_point = [&](const std::array<double, 3>& t) -> bool {
    if (out.evaluations >= budget) return false;
    ++out.evaluations;
    const auto v = detail::nlml(dist, s.y, to_params(t));
    if (!v) return false;
    any_ok = true;
    if (*v < out.nlml) {
      out.nlml = *v;
      out.params = to_params(t);
      best = t;
      return true;
    }
    return false;
  };

  for (double shift : {-std::log(4.0), std::log(4.0)}) {
    std::array<double, 3> t = best;
    t[0] = std::clamp(std::log(start.length_scale) + shift, lo[0], hi[0]);
    try_point(t);
  }

  double step = 1.0;
  while (out.evaluations < budget && step > 1e-3) {
    bool improved = false;
    for (int c = 0; c < 3 && out.evaluations < budget; ++c) {
      for (double dir : {1.0, -1.0}) {
        std::array<double, 3> t = best;
        t[c] = std::clamp(t[c] + dir * step, lo[c], hi[c]);
        if (t[c] == best[c]) continue;
        if (try_point(t)) {
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  out.warning = !any_ok;
  return out;
}

}  // namespace piqi
