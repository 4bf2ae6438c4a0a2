#pragma once

// On-disk feature cache keyed by (SHA-256 of the file bytes, layout version).

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "piqi/binio.hpp"
#include "piqi/error.hpp"
#include "piqi/fsutil.hpp"

namespace piqi {

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("EVP_MD_CTX_new failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    char b[3];
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

class FeatureCache {
 public:
  FeatureCache(std::filesystem::path dir, std::string layout_version)
      : dir_(std::move(dir)), layout_version_(std::move(layout_version)) {}

  /// Cache rooted at $PIQI_CACHE_DIR, if set and non-empty.
  static std::optional<FeatureCache> from_env(const std::string& layout_version) {
    const char* dir = std::getenv("PIQI_CACHE_DIR");
    if (!dir || !*dir) return std::nullopt;
    return FeatureCache(dir, layout_version);
  }

  std::filesystem::path entry_path(const std::string& digest) const {
    return dir_ / (digest + "-" + layout_version_ + ".f64");
  }

  std::optional<std::vector<double>> lookup(const std::string& digest, std::size_t expected) const {
    std::ifstream in(entry_path(digest), std::ios::binary);
    if (!in) return std::nullopt;
    try {
      auto v = binio::get_f64s(in);
      if (v.size() != expected) return std::nullopt;
      return v;
    } catch (const ParseError&) {
      return std::nullopt;
    }
  }

  void store(const std::string& digest, const std::vector<double>& values) const {
    write_atomically(entry_path(digest), [&](std::ostream& out) { binio::put_f64s(out, values); },
                     true);
  }

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  std::string layout_version_;
};

}  // namespace piqi
