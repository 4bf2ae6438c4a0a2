#pragma once

// MSCN coefficients, zero-mode GGD fit on the coefficients and AGGD fits on
// the four adjacent-pair product maps.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "piqi/error.hpp"
#include "piqi/plane.hpp"

namespace piqi {

inline constexpr int kMscnHalfWindow = 3;
inline constexpr double kMscnWindowSigma = 7.0 / 6.0;
// MSCN runs on 8-bit style intensities so the +1 stabilizer has its usual weight.
inline constexpr double kMscnIntensityScale = 255.0;

inline constexpr double kShapeMin = 0.2;
inline constexpr double kShapeMax = 10.0;
inline constexpr double kShapeStep = 1e-3;
inline constexpr double kDegenerateScale = 1e-6;
inline constexpr std::size_t kMinFitSamples = 16;

/// (2K+1) x (2L+1) normalized weights, row offsets k, column offsets l.
struct MscnWindow {
  int half_rows = 0;
  int half_cols = 0;
  std::vector<double> weights;

  double at(int k, int l) const {
    return weights[static_cast<std::size_t>((k + half_rows) * (2 * half_cols + 1) + (l + half_cols))];
  }
};

struct MscnField {
  Plane coeffs;
  MscnWindow window;
};

struct GgdParams {
  double alpha = 2.0;
  double beta = kDegenerateScale;
};

struct AggdParams {
  double gamma = 2.0;
  double beta_l = kDegenerateScale;
  double beta_r = kDegenerateScale;
  double eta = 0.0;
};

inline MscnWindow mscn_window(int half_rows = kMscnHalfWindow, int half_cols = kMscnHalfWindow,
                              double sigma = kMscnWindowSigma) {
  if (half_rows < 1 || half_cols < 1) throw InvalidArgument("mscn_window: K and L must be >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("mscn_window: sigma must be positive");
  }
  MscnWindow w{half_rows, half_cols, {}};
  w.weights.reserve(static_cast<std::size_t>((2 * half_rows + 1) * (2 * half_cols + 1)));
  double total = 0.0;
  for (int k = -half_rows; k <= half_rows; ++k) {
    for (int l = -half_cols; l <= half_cols; ++l) {
      const double v = std::exp(-(k * k + l * l) / (2.0 * sigma * sigma));
      w.weights.push_back(v);
      total += v;
    }
  }
  for (double& v : w.weights) v /= total;
  return w;
}

/// (I - mu) / (sigma + 1) with Gaussian-weighted local mean and deviation,
/// replicate borders. The local mean is accumulated as an offset from the
/// center pixel so that flat neighbourhoods give exactly zero.
inline MscnField mscn(const Plane& p, const MscnWindow& w) {
  const auto rows = static_cast<std::size_t>(2 * w.half_rows + 1);
  const auto cols = static_cast<std::size_t>(2 * w.half_cols + 1);
  if (p.height() < rows || p.width() < cols) {
    throw InvalidArgument("mscn: plane " + std::to_string(p.width()) + "x" +
                          std::to_string(p.height()) + " is smaller than the " +
                          std::to_string(cols) + "x" + std::to_string(rows) + " window");
  }
  MscnField field{Plane(p.width(), p.height()), w};
  std::vector<double> patch(rows * cols);
  for (std::size_t r = 0; r < p.height(); ++r) {
    const auto row = static_cast<std::ptrdiff_t>(r);
    for (std::size_t c = 0; c < p.width(); ++c) {
      const auto col = static_cast<std::ptrdiff_t>(c);
      const double center = p(r, c);
      double offset = 0.0;
      std::size_t n = 0;
      for (int k = -w.half_rows; k <= w.half_rows; ++k) {
        for (int l = -w.half_cols; l <= w.half_cols; ++l, ++n) {
          patch[n] = p.clamped(row + k, col + l) - center;
          offset += w.weights[n] * patch[n];
        }
      }
      double var = 0.0;
      for (std::size_t i = 0; i < patch.size(); ++i) {
        const double d = patch[i] - offset;
        var += w.weights[i] * d * d;
      }
      field.coeffs(r, c) = -offset / (std::sqrt(var) + 1.0);
    }
  }
  return field;
}

namespace detail {

// rho(a) = Gamma(1/a) Gamma(3/a) / Gamma(2/a)^2, strictly decreasing in a.
inline double ggd_ratio(double a) {
  return std::exp(std::lgamma(1.0 / a) + std::lgamma(3.0 / a) - 2.0 * std::lgamma(2.0 / a));
}

class ShapeTable {
 public:
  ShapeTable() {
    const auto n = static_cast<std::size_t>(std::llround((kShapeMax - kShapeMin) / kShapeStep)) + 1;
    shape_.resize(n);
    ratio_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      shape_[i] = kShapeMin + static_cast<double>(i) * kShapeStep;
      ratio_[i] = ggd_ratio(shape_[i]);
      if (i > 0 && !(ratio_[i] < ratio_[i - 1])) {
        throw Error("GGD moment ratio is not strictly decreasing on the shape grid");
      }
    }
  }

  std::span<const double> shapes() const noexcept { return shape_; }
  std::span<const double> ratios() const noexcept { return ratio_; }

  /// Shape whose moment ratio equals `target`; grid lookup locates the
  /// bracketing cell, bisection refines inside it. Clamps to the search range.
  double invert(double target) const {
    if (!(target < ratio_.front())) return shape_.front();
    if (!(target > ratio_.back())) return shape_.back();
    // first index whose ratio <= target (ratios decrease)
    auto it = std::lower_bound(ratio_.begin(), ratio_.end(), target,
                               [](double r, double t) { return r > t; });
    const auto hi_idx = static_cast<std::size_t>(it - ratio_.begin());
    if (ratio_[hi_idx] == target) return shape_[hi_idx];
    double lo = shape_[hi_idx - 1], hi = shape_[hi_idx];
    for (int iter = 0; iter < 60 && hi - lo > 1e-15; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (ggd_ratio(mid) > target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

  static const ShapeTable& instance() {
    static const ShapeTable table;
    return table;
  }

 private:
  std::vector<double> shape_;
  std::vector<double> ratio_;
};

}  // namespace detail

/// Mean of an AGGD: (beta_r - beta_l) Gamma(2/gamma) / Gamma(1/gamma).
inline double aggd_mean(double gamma, double beta_l, double beta_r) {
  return (beta_r - beta_l) * std::exp(std::lgamma(2.0 / gamma) - std::lgamma(1.0 / gamma));
}

/// Moment-matching zero-mode GGD fit.
inline GgdParams fit_ggd(std::span<const double> samples) {
  if (samples.size() < kMinFitSamples) {
    throw InvalidArgument("fit_ggd: need at least 16 samples, got " +
                          std::to_string(samples.size()));
  }
  double abs_sum = 0.0, sq_sum = 0.0;
  for (double x : samples) {
    abs_sum += std::abs(x);
    sq_sum += x * x;
  }
  const double n = static_cast<double>(samples.size());
  const double mean_abs = abs_sum / n;
  const double mean_sq = sq_sum / n;
  if (!(mean_sq > 1e-20) || !std::isfinite(mean_sq)) return GgdParams{};

  const double alpha = detail::ShapeTable::instance().invert(mean_sq / (mean_abs * mean_abs));
  const double beta =
      std::sqrt(mean_sq * std::exp(std::lgamma(1.0 / alpha) - std::lgamma(3.0 / alpha)));
  return {alpha, beta};
}

/// Moment-based AGGD fit from the one-sided second moments and the
/// generalized Gaussian ratio statistic.
inline AggdParams fit_aggd(std::span<const double> samples) {
  if (samples.size() < kMinFitSamples) {
    throw InvalidArgument("fit_aggd: need at least 16 samples, got " +
                          std::to_string(samples.size()));
  }
  double left_sq = 0.0, right_sq = 0.0, abs_sum = 0.0, sq_sum = 0.0;
  std::size_t left_n = 0, right_n = 0;
  for (double x : samples) {
    if (x < 0.0) {
      left_sq += x * x;
      ++left_n;
    } else if (x > 0.0) {
      right_sq += x * x;
      ++right_n;
    }
    abs_sum += std::abs(x);
    sq_sum += x * x;
  }
  const double n = static_cast<double>(samples.size());
  const double mean_sq = sq_sum / n;
  if (left_n == 0 || right_n == 0 || !(mean_sq > 1e-20) || !std::isfinite(mean_sq)) {
    return AggdParams{};
  }
  const double sigma_l = std::sqrt(left_sq / static_cast<double>(left_n));
  const double sigma_r = std::sqrt(right_sq / static_cast<double>(right_n));
  const double g = sigma_l / sigma_r;
  const double mean_abs = abs_sum / n;
  const double r_hat = mean_abs * mean_abs / mean_sq;
  const double big_r =
      r_hat * (g * g * g + 1.0) * (g + 1.0) / ((g * g + 1.0) * (g * g + 1.0));

  AggdParams out;
  out.gamma = detail::ShapeTable::instance().invert(1.0 / big_r);
  const double scale = std::exp(0.5 * (std::lgamma(1.0 / out.gamma) - std::lgamma(3.0 / out.gamma)));
  out.beta_l = sigma_l * scale;
  out.beta_r = sigma_r * scale;
  out.eta = aggd_mean(out.gamma, out.beta_l, out.beta_r);
  return out;
}

/// Adjacent-pair products in the fixed order [horizontal, main diagonal,
/// anti-diagonal, vertical]. Each map drops the row/column the shift leaves.
inline std::array<Plane, 4> paired_products(const Plane& f) {
  if (f.width() < 2 || f.height() < 2) {
    throw InvalidArgument("paired_products: field must be at least 2x2");
  }
  const std::size_t w = f.width(), h = f.height();
  std::array<Plane, 4> out{Plane(w - 1, h), Plane(w - 1, h - 1), Plane(w - 1, h - 1),
                           Plane(w, h - 1)};
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j + 1 < w; ++j) out[0](i, j) = f(i, j) * f(i, j + 1);
  }
  for (std::size_t i = 0; i + 1 < h; ++i) {
    for (std::size_t j = 0; j + 1 < w; ++j) {
      out[1](i, j) = f(i, j) * f(i + 1, j + 1);
      out[2](i, j) = f(i, j + 1) * f(i + 1, j);
    }
    for (std::size_t j = 0; j < w; ++j) out[3](i, j) = f(i, j) * f(i + 1, j);
  }
  return out;
}

inline std::array<Plane, 4> paired_products(const MscnField& m) { return paired_products(m.coeffs); }

inline Plane scale_intensity(const Plane& p, double factor) {
  Plane out = p;
  for (double& v : out.values()) v *= factor;
  return out;
}

/// MSCN of a [0,1] plane after rescaling to [0,255].
inline MscnField standardized_luminance(const Plane& p) {
  static const MscnWindow window = mscn_window();
  return mscn(scale_intensity(p, kMscnIntensityScale), window);
}

/// [gamma, beta_l, beta_r, eta] for each of the four product maps.
inline std::array<double, 16> product_features(const MscnField& field) {
  std::array<double, 16> out{};
  const auto maps = paired_products(field);
  for (std::size_t o = 0; o < maps.size(); ++o) {
    const AggdParams a = fit_aggd(maps[o].values());
    out[4 * o + 0] = a.gamma;
    out[4 * o + 1] = a.beta_l;
    out[4 * o + 2] = a.beta_r;
    out[4 * o + 3] = a.eta;
  }
  return out;
}

/// [alpha, beta] of the MSCN field, then the 16 product-map AGGD values.
inline std::array<double, 18> mscn_features(const Plane& p) {
  const MscnField field = standardized_luminance(p);
  const GgdParams g = fit_ggd(field.coeffs.values());
  std::array<double, 18> out{};
  out[0] = g.alpha;
  out[1] = g.beta;
  const auto prod = product_features(field);
  std::copy(prod.begin(), prod.end(), out.begin() + 2);
  return out;
}

}  // namespace piqi
