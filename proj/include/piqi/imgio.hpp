#pragma once

// Image loading, color-space conversion and the dyadic scale pyramid.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <string_view>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "piqi/error.hpp"
#include "piqi/plane.hpp"

namespace piqi {

enum class Channel : std::uint8_t { Gray, R, G, B, Y, Cb, Cr, H, S, I };

inline constexpr std::array<Channel, 10> kAllChannels = {
    Channel::Gray, Channel::R,  Channel::G, Channel::B, Channel::Y,
    Channel::Cb,   Channel::Cr, Channel::H, Channel::S, Channel::I};

inline constexpr std::array<Channel, 9> kColorChannels = {
    Channel::R, Channel::G, Channel::B, Channel::Y, Channel::Cb,
    Channel::Cr, Channel::H, Channel::S, Channel::I};

constexpr std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::Gray: return "gray";
    case Channel::R: return "R";
    case Channel::G: return "G";
    case Channel::B: return "B";
    case Channel::Y: return "Y";
    case Channel::Cb: return "Cb";
    case Channel::Cr: return "Cr";
    case Channel::H: return "H";
    case Channel::S: return "S";
    case Channel::I: return "I";
  }
  return "?";
}

struct ImagePlanes {
  Plane gray;
  std::array<Plane, 3> rgb;
  std::array<Plane, 3> ycbcr;
  std::array<Plane, 3> hsi;

  std::size_t width() const noexcept { return gray.width(); }
  std::size_t height() const noexcept { return gray.height(); }

  const Plane& channel(Channel c) const {
    switch (c) {
      case Channel::Gray: return gray;
      case Channel::R: return rgb[0];
      case Channel::G: return rgb[1];
      case Channel::B: return rgb[2];
      case Channel::Y: return ycbcr[0];
      case Channel::Cb: return ycbcr[1];
      case Channel::Cr: return ycbcr[2];
      case Channel::H: return hsi[0];
      case Channel::S: return hsi[1];
      case Channel::I: return hsi[2];
    }
    throw InvalidArgument("unknown channel");
  }
};

namespace detail {

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

inline void require_rgb(const Plane& r, const Plane& g, const Plane& b, const char* what) {
  require_same_shape(r, g, what);
  require_same_shape(r, b, what);
}

}  // namespace detail

// BT.601 luma.
inline Plane to_grayscale(const Plane& r, const Plane& g, const Plane& b) {
  detail::require_rgb(r, g, b, "to_grayscale");
  Plane out(r.width(), r.height());
  auto rv = r.values(), gv = g.values(), bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    ov[i] = detail::clamp01(0.299 * rv[i] + 0.587 * gv[i] + 0.114 * bv[i]);
  }
  return out;
}

// BT.601 full-range YCbCr with chroma offset by +0.5 into [0,1].
inline std::array<Plane, 3> to_ycbcr(const Plane& r, const Plane& g, const Plane& b) {
  detail::require_rgb(r, g, b, "to_ycbcr");
  std::array<Plane, 3> out{Plane(r.width(), r.height()), Plane(r.width(), r.height()),
                           Plane(r.width(), r.height())};
  auto rv = r.values(), gv = g.values(), bv = b.values();
  for (std::size_t i = 0; i < rv.size(); ++i) {
    const double R = rv[i], G = gv[i], B = bv[i];
    out[0].values()[i] = detail::clamp01(0.299 * R + 0.587 * G + 0.114 * B);
    out[1].values()[i] = detail::clamp01(-0.168736 * R - 0.331264 * G + 0.5 * B + 0.5);
    out[2].values()[i] = detail::clamp01(0.5 * R - 0.418688 * G - 0.081312 * B + 0.5);
  }
  return out;
}

// Gonzalez-Woods HSI. Hue is the angle divided by 2*pi; achromatic pixels
// (R == G == B) get H = S = 0.
//
// The hue angle is evaluated as atan2 of the opponent components, which is the
// same angle as the textbook arccos form but keeps full precision near gray.
inline std::array<Plane, 3> to_hsi(const Plane& r, const Plane& g, const Plane& b) {
  detail::require_rgb(r, g, b, "to_hsi");
  std::array<Plane, 3> out{Plane(r.width(), r.height()), Plane(r.width(), r.height()),
                           Plane(r.width(), r.height())};
  auto rv = r.values(), gv = g.values(), bv = b.values();
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < rv.size(); ++i) {
    const double R = rv[i], G = gv[i], B = bv[i];
    const double sum = R + G + B;
    double h = 0.0, s = 0.0;
    if (!(R == G && G == B)) {
      const double a = R - 0.5 * (G + B);
      const double c = 0.5 * std::numbers::sqrt3 * (G - B);
      double theta = std::atan2(c, a);
      if (theta < 0.0) theta += two_pi;
      h = theta / two_pi;
      if (h >= 1.0) h = 0.0;
      s = 1.0 - 3.0 * std::min({R, G, B}) / sum;
    }
    out[0].values()[i] = detail::clamp01(h);
    out[1].values()[i] = detail::clamp01(s);
    out[2].values()[i] = detail::clamp01(sum / 3.0);
  }
  return out;
}

// Inverse of to_hsi (sector formulas).
inline std::array<double, 3> hsi_to_rgb(double h, double s, double i) {
  constexpr double third = 2.0 * std::numbers::pi / 3.0;
  constexpr double sixth = std::numbers::pi / 3.0;
  double angle = h * 2.0 * std::numbers::pi;
  auto boosted = [&](double a) { return i * (1.0 + s * std::cos(a) / std::cos(sixth - a)); };
  const double low = i * (1.0 - s);
  if (angle < third) {
    const double r = boosted(angle);
    return {r, 3.0 * i - (r + low), low};
  }
  if (angle < 2.0 * third) {
    angle -= third;
    const double g = boosted(angle);
    return {low, g, 3.0 * i - (low + g)};
  }
  angle -= 2.0 * third;
  const double b = boosted(angle);
  return {3.0 * i - (low + b), low, b};
}

// 2x2 mean pooling; a trailing odd row or column is dropped.
inline Plane downsample_half(const Plane& p) {
  if (p.width() < 2 || p.height() < 2) {
    throw InvalidArgument("downsample_half: plane " + std::to_string(p.width()) + "x" +
                          std::to_string(p.height()) + " is smaller than 2x2");
  }
  const std::size_t w = p.width() / 2, h = p.height() / 2;
  Plane out(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      out(r, c) = 0.25 * (p(2 * r, 2 * c) + p(2 * r, 2 * c + 1) + p(2 * r + 1, 2 * c) +
                          p(2 * r + 1, 2 * c + 1));
    }
  }
  return out;
}

inline ImagePlanes make_planes(Plane r, Plane g, Plane b) {
  detail::require_rgb(r, g, b, "make_planes");
  ImagePlanes out;
  out.gray = to_grayscale(r, g, b);
  out.ycbcr = to_ycbcr(r, g, b);
  out.hsi = to_hsi(r, g, b);
  out.rgb = {std::move(r), std::move(g), std::move(b)};
  return out;
}

// Next coarser scale: pool the RGB planes, then recompute every conversion.
inline ImagePlanes downsample_half(const ImagePlanes& img) {
  return make_planes(downsample_half(img.rgb[0]), downsample_half(img.rgb[1]),
                     downsample_half(img.rgb[2]));
}

// Accepts 8-bit or 16-bit matrices with 1, 3 (BGR) or 4 (BGRA) channels.
inline ImagePlanes planes_from_mat(const cv::Mat& mat) {
  if (mat.empty() || mat.rows == 0 || mat.cols == 0) {
    throw ImageError(ImageError::Kind::ZeroArea, "image has zero area");
  }
  double scale = 0.0;
  switch (mat.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default:
      throw ImageError(ImageError::Kind::UnsupportedFormat,
                       "unsupported sample depth (only 8-bit and 16-bit are accepted)");
  }
  const int nch = mat.channels();
  if (nch != 1 && nch != 3 && nch != 4) {
    throw ImageError(ImageError::Kind::UnsupportedFormat,
                     "unsupported channel count " + std::to_string(nch));
  }
  const auto w = static_cast<std::size_t>(mat.cols), h = static_cast<std::size_t>(mat.rows);
  Plane r(w, h), g(w, h), b(w, h);
  auto sample = [&](int row, int col, int ch) -> double {
    if (mat.depth() == CV_8U) return mat.ptr<std::uint8_t>(row)[col * nch + ch] * scale;
    return mat.ptr<std::uint16_t>(row)[col * nch + ch] * scale;
  };
  for (int row = 0; row < mat.rows; ++row) {
    for (int col = 0; col < mat.cols; ++col) {
      const auto ur = static_cast<std::size_t>(row), uc = static_cast<std::size_t>(col);
      if (nch == 1) {
        const double v = sample(row, col, 0);
        r(ur, uc) = g(ur, uc) = b(ur, uc) = v;
      } else {
        b(ur, uc) = sample(row, col, 0);
        g(ur, uc) = sample(row, col, 1);
        r(ur, uc) = sample(row, col, 2);
      }
    }
  }
  return make_planes(std::move(r), std::move(g), std::move(b));
}

inline ImagePlanes load_image(const std::filesystem::path& path) {
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe || std::filesystem::is_directory(path)) {
      throw ImageError(ImageError::Kind::Unreadable, "cannot read image file " + path.string());
    }
  }
  cv::Mat mat;
  try {
    mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_IGNORE_ORIENTATION);
  } catch (const cv::Exception& e) {
    throw ImageError(ImageError::Kind::UnsupportedFormat,
                     "cannot decode " + path.string() + ": " + e.what());
  }
  if (mat.empty()) {
    throw ImageError(ImageError::Kind::UnsupportedFormat,
                     "unsupported or corrupt image format: " + path.string());
  }
  try {
    return planes_from_mat(mat);
  } catch (const ImageError& e) {
    throw ImageError(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace piqi
