#pragma once

// Gradient statistics: GM / RO / RM maps from Gaussian-derivative filtering and
// their histogram-variance descriptors.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "piqi/error.hpp"
#include "piqi/plane.hpp"

namespace piqi {

inline constexpr double kDefaultDerivativeSigma = 0.5;
inline constexpr int kDefaultDerivativeRadius = 2;
inline constexpr int kDefaultHistogramBins = 100;

/// Square (2r+1)x(2r+1) stencils, row-major with offset dy along rows and dx
/// along columns: index (dy + r) * (2r + 1) + (dx + r).
struct DerivativeKernels {
  double sigma = 0.0;
  int radius = 0;
  std::vector<double> kx;
  std::vector<double> ky;

  int side() const noexcept { return 2 * radius + 1; }

  double at_x(int dx, int dy) const { return kx[index(dx, dy)]; }
  double at_y(int dx, int dy) const { return ky[index(dx, dy)]; }

  std::size_t index(int dx, int dy) const {
    return static_cast<std::size_t>((dy + radius) * side() + (dx + radius));
  }
};

struct GradientMaps {
  Plane gm;
  Plane ro;
  Plane rm;
};

// ky(x, y) = -y / (2 pi sigma^4) * exp(-(x^2 + y^2) / (2 sigma^2)), kx = ky^T.
// Only the y > 0 half is sampled; the other half is its exact negation, so both
// stencils sum to exactly zero and the zero-mean condition needs no correction.
inline DerivativeKernels gaussian_derivative_kernels(double sigma = kDefaultDerivativeSigma,
                                                     int radius = kDefaultDerivativeRadius) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("gaussian_derivative_kernels: sigma must be positive");
  }
  if (radius < 1) throw InvalidArgument("gaussian_derivative_kernels: radius must be >= 1");

  DerivativeKernels k;
  k.sigma = sigma;
  k.radius = radius;
  const auto n = static_cast<std::size_t>(k.side() * k.side());
  k.kx.assign(n, 0.0);
  k.ky.assign(n, 0.0);
  const double norm = 1.0 / (2.0 * std::numbers::pi * std::pow(sigma, 4));
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  for (int dy = 1; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const double v = -dy * norm * std::exp(-(dx * dx + dy * dy) * inv2s2);
      k.ky[k.index(dx, dy)] = v;
      k.ky[k.index(dx, -dy)] = -v;
      k.kx[k.index(dy, dx)] = v;
      k.kx[k.index(-dy, dx)] = -v;
    }
  }
  return k;
}

namespace detail {

// Wrap an angle difference into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  if (a > pi) a -= 2.0 * pi;
  if (a <= -pi) a += 2.0 * pi;
  return a;
}

inline double orientation(double gx, double gy) {
  if (gx == 0.0 && gy == 0.0) return 0.0;
  return std::atan2(gy, gx);
}

// 3x3 box mean with replicate borders.
inline Plane box_mean3(const Plane& p) {
  Plane out(p.width(), p.height());
  for (std::size_t r = 0; r < p.height(); ++r) {
    for (std::size_t c = 0; c < p.width(); ++c) {
      double s = 0.0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          s += p.clamped(static_cast<std::ptrdiff_t>(r) + dr, static_cast<std::ptrdiff_t>(c) + dc);
        }
      }
      out(r, c) = s / 9.0;
    }
  }
  return out;
}

}  // namespace detail

/// Directional derivatives by 2-D correlation with replicate padding. Each
/// antisymmetric tap pair is folded into one multiply of a pixel difference,
/// so flat regions give exactly zero.
inline std::array<Plane, 2> directional_derivatives(const Plane& p, const DerivativeKernels& k) {
  const int rad = k.radius;
  if (p.width() < static_cast<std::size_t>(k.side()) ||
      p.height() < static_cast<std::size_t>(k.side())) {
    throw InvalidArgument("gradient_maps: plane " + std::to_string(p.width()) + "x" +
                          std::to_string(p.height()) + " is smaller than the " +
                          std::to_string(k.side()) + "x" + std::to_string(k.side()) + " kernel");
  }
  Plane ix(p.width(), p.height()), iy(p.width(), p.height());
  for (std::size_t r = 0; r < p.height(); ++r) {
    const auto row = static_cast<std::ptrdiff_t>(r);
    for (std::size_t c = 0; c < p.width(); ++c) {
      const auto col = static_cast<std::ptrdiff_t>(c);
      double gx = 0.0, gy = 0.0;
      for (int a = 1; a <= rad; ++a) {
        for (int b = -rad; b <= rad; ++b) {
          gy += k.at_y(b, a) * (p.clamped(row + a, col + b) - p.clamped(row - a, col + b));
          gx += k.at_x(a, b) * (p.clamped(row + b, col + a) - p.clamped(row + b, col - a));
        }
      }
      ix(r, c) = gx;
      iy(r, c) = gy;
    }
  }
  return {std::move(ix), std::move(iy)};
}

inline GradientMaps gradient_maps(const Plane& p, const DerivativeKernels& k) {
  auto [ix, iy] = directional_derivatives(p, k);
  const Plane ix_avg = detail::box_mean3(ix);
  const Plane iy_avg = detail::box_mean3(iy);

  GradientMaps m{Plane(p.width(), p.height()), Plane(p.width(), p.height()),
                 Plane(p.width(), p.height())};
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gx = ix.values()[i], gy = iy.values()[i];
    const double ax = ix_avg.values()[i], ay = iy_avg.values()[i];
    m.gm.values()[i] = std::hypot(gx, gy);
    m.ro.values()[i] =
        detail::wrap_angle(detail::orientation(gx, gy) - detail::orientation(ax, ay));
    m.rm.values()[i] = std::hypot(gx - ax, gy - ay);
  }
  return m;
}

/// Variance of the probability-normalized histogram about its mean 1/bins.
/// Bins span [min, max] of the map; a constant map lands entirely in bin 0.
inline double hist_variance(const Plane& map, int bins = kDefaultHistogramBins) {
  if (bins < 2) throw InvalidArgument("hist_variance: bins must be >= 2");
  if (map.empty()) throw InvalidArgument("hist_variance: empty map");

  const auto vals = map.values();
  const auto [lo_it, hi_it] = std::minmax_element(vals.begin(), vals.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  if (hi > lo) {
    const double scale = bins / (hi - lo);
    for (double v : vals) {
      auto b = static_cast<std::size_t>((v - lo) * scale);
      counts[std::min(b, counts.size() - 1)]++;
    }
  } else {
    counts[0] = vals.size();
  }
  const double mean = 1.0 / bins;
  const double n = static_cast<double>(vals.size());
  double var = 0.0;
  for (std::size_t c : counts) {
    const double d = static_cast<double>(c) / n - mean;
    var += d * d;
  }
  return var;
}

/// [V_GM, V_RO, V_RM] for one plane.
inline std::array<double, 3> gradient_features(const Plane& p, const DerivativeKernels& k,
                                               int bins = kDefaultHistogramBins) {
  const GradientMaps m = gradient_maps(p, k);
  return {hist_variance(m.gm, bins), hist_variance(m.ro, bins), hist_variance(m.rm, bins)};
}

}  // namespace piqi
