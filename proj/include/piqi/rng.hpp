#pragma once

#include <cstdint>
#include <random>

namespace piqi {

/// Deterministic 64-bit seed from a master seed and two stream tags.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(a),      static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),      static_cast<std::uint32_t>(b >> 32)};
  std::mt19937_64 eng(seq);
  return eng();
}

}  // namespace piqi
