#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>

#include "piqi/error.hpp"

namespace piqi {

/// Writes through `writer` into a sibling temp file, then renames it over
/// `path`. A failed write leaves any previous file untouched.
inline void write_atomically(const std::filesystem::path& path,
                             const std::function<void(std::ostream&)>& writer,
                             bool binary = false) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::random_device rd;
  const fs::path tmp = path.string() + ".tmp." + std::to_string(rd());
  {
    std::ofstream out(tmp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    try {
      writer(out);
    } catch (...) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw;
    }
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error("write failed for " + path.string());
    }
  }
  fs::rename(tmp, path);
}

}  // namespace piqi
