#pragma once

// Multi-scale, multi-color-space feature extraction into the fixed
// 192-dimensional descriptor.
//
// Layout, per scale (full, 1/2, 1/4), 64 values:
//   [0, 30)   gradient variances [V_GM, V_RO, V_RM] for gray, R, G, B, Y, Cb, Cr, H, S, I
//   [30, 48)  GGD [alpha, beta] of the MSCN field for R, G, B, Y, Cb, Cr, H, S, I
//   [48, 64)  AGGD [gamma, beta_l, beta_r, eta] of the gray MSCN products H, D1, D2, V

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "piqi/cache.hpp"
#include "piqi/error.hpp"
#include "piqi/gradfeat.hpp"
#include "piqi/imgio.hpp"
#include "piqi/manifest.hpp"
#include "piqi/mscnfeat.hpp"
#include "piqi/parallel.hpp"

namespace piqi {

inline constexpr std::size_t kFeatureCount = 192;
inline constexpr std::size_t kFeaturesPerScale = 64;
inline constexpr std::size_t kScaleCount = 3;
inline constexpr std::size_t kMinImageSide = 32;
inline constexpr const char* kLayoutVersion = "piqi-192-v1";

enum class FeatureBlock { Gradient, Ggd, Aggd };

struct LayoutEntry {
  int scale_divisor;  // 1, 2 or 4
  Channel channel;
  FeatureBlock block;
  std::string feature;  // e.g. "V_GM", "alpha", "D1_gamma"

  std::string name() const {
    return "s" + std::to_string(scale_divisor) + "_" + std::string(channel_name(channel)) + "_" +
           feature;
  }
};

struct FeatureLayout {
  std::string version;
  std::vector<LayoutEntry> entries;
};

struct FeatureVector {
  std::array<double, kFeatureCount> values{};
  std::string layout_version = kLayoutVersion;
};

inline const FeatureLayout& layout() {
  static const FeatureLayout table = [] {
    FeatureLayout l{kLayoutVersion, {}};
    l.entries.reserve(kFeatureCount);
    static constexpr std::array<const char*, 3> grad = {"V_GM", "V_RO", "V_RM"};
    static constexpr std::array<const char*, 4> orient = {"H", "D1", "D2", "V"};
    static constexpr std::array<const char*, 4> aggd = {"gamma", "beta_l", "beta_r", "eta"};
    for (int divisor : {1, 2, 4}) {
      for (Channel c : kAllChannels) {
        for (const char* f : grad) l.entries.push_back({divisor, c, FeatureBlock::Gradient, f});
      }
      for (Channel c : kColorChannels) {
        l.entries.push_back({divisor, c, FeatureBlock::Ggd, "alpha"});
        l.entries.push_back({divisor, c, FeatureBlock::Ggd, "beta"});
      }
      for (const char* o : orient) {
        for (const char* p : aggd) {
          l.entries.push_back(
              {divisor, Channel::Gray, FeatureBlock::Aggd, std::string(o) + "_" + p});
        }
      }
    }
    return l;
  }();
  return table;
}

namespace detail {

inline void scale_features(const ImagePlanes& img, const DerivativeKernels& kernels,
                           double* out) {
  for (Channel c : kAllChannels) {
    const auto g = gradient_features(img.channel(c), kernels);
    out = std::copy(g.begin(), g.end(), out);
  }
  for (Channel c : kColorChannels) {
    const MscnField field = standardized_luminance(img.channel(c));
    const GgdParams p = fit_ggd(field.coeffs.values());
    *out++ = p.alpha;
    *out++ = p.beta;
  }
  const auto prod = product_features(standardized_luminance(img.gray));
  std::copy(prod.begin(), prod.end(), out);
}

}  // namespace detail

inline FeatureVector extract_features(const ImagePlanes& img) {
  if (img.width() < kMinImageSide || img.height() < kMinImageSide) {
    throw InvalidArgument("extract_features: image " + std::to_string(img.width()) + "x" +
                          std::to_string(img.height()) + " is smaller than 32x32");
  }
  static const DerivativeKernels kernels = gaussian_derivative_kernels();
  FeatureVector fv;
  const ImagePlanes half = downsample_half(img);
  const ImagePlanes quarter = downsample_half(half);
  detail::scale_features(img, kernels, fv.values.data());
  detail::scale_features(half, kernels, fv.values.data() + kFeaturesPerScale);
  detail::scale_features(quarter, kernels, fv.values.data() + 2 * kFeaturesPerScale);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!std::isfinite(fv.values[i])) {
      throw Error("non-finite feature " + layout().entries[i].name());
    }
  }
  return fv;
}

inline FeatureVector extract_features(const std::filesystem::path& path) {
  return extract_features(load_image(path));
}

struct BatchFailure {
  std::size_t index;
  std::filesystem::path path;
  std::string message;
};

struct FeatureBatch {
  Eigen::MatrixXd features;         // one row per successful image
  std::vector<double> scores;       // raw manifest scores, same rows
  std::vector<std::size_t> rows;    // manifest row index of each feature row
  std::vector<BatchFailure> failures;
};

/// Extracts every manifest image, optionally through a feature cache.
/// Output order follows the manifest regardless of `parallelism`. Throws if
/// more than 10% of the images fail; fewer failures are reported in the result.
inline FeatureBatch extract_batch(const DatasetManifest& manifest, int parallelism = 1,
                                  const FeatureCache* cache = nullptr) {
  const std::size_t n = manifest.size();
  std::vector<std::optional<FeatureVector>> results(n);
  std::vector<std::string> errors(n);
  parallel_for(n, parallelism, [&](std::size_t i) {
    const auto& path = manifest.rows[i].path;
    try {
      std::string digest;
      if (cache) {
        digest = sha256_file(path);
        if (auto hit = cache->lookup(digest, kFeatureCount)) {
          FeatureVector fv;
          std::copy(hit->begin(), hit->end(), fv.values.begin());
          results[i] = fv;
          return;
        }
      }
      results[i] = extract_features(path);
      if (cache) {
        cache->store(digest, std::vector<double>(results[i]->values.begin(), results[i]->values.end()));
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  FeatureBatch batch;
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i]) batch.failures.push_back({i, manifest.rows[i].path, errors[i]});
  }
  if (batch.failures.size() * 10 > n) {
    std::string msg = "feature extraction failed for " + std::to_string(batch.failures.size()) +
                      " of " + std::to_string(n) + " images:";
    for (const auto& f : batch.failures) msg += "\n  " + f.path.string() + ": " + f.message;
    throw Error(msg);
  }
  const std::size_t ok = n - batch.failures.size();
  batch.features.resize(static_cast<Eigen::Index>(ok), static_cast<Eigen::Index>(kFeatureCount));
  std::size_t r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i]) continue;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      batch.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = results[i]->values[j];
    }
    batch.scores.push_back(manifest.rows[i].score);
    batch.rows.push_back(i);
    ++r;
  }
  return batch;
}

}  // namespace piqi
