#pragma once

// Explicit little-endian encoding helpers shared by the model container and
// the feature cache.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "piqi/error.hpp"

namespace piqi::binio {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(buf, 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(buf, 4);
}

inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void put_f64s(std::ostream& out, std::span<const double> v) {
  put_u64(out, v.size());
  for (double x : v) put_f64(out, x);
}

inline void put_indices(std::ostream& out, std::span<const std::size_t> v) {
  put_u64(out, v.size());
  for (auto x : v) put_u64(out, x);
}

inline void read_exact(std::istream& in, char* buf, std::size_t n) {
  in.read(buf, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw ParseError("unexpected end of binary data");
}

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  read_exact(in, reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char buf[4];
  read_exact(in, reinterpret_cast<char*>(buf), 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

// Guards against absurd lengths from corrupt files before allocating.
inline std::size_t get_length(std::istream& in, std::size_t limit = std::size_t{1} << 32) {
  const auto n = get_u64(in);
  if (n > limit) throw ParseError("corrupt length field in binary data");
  return static_cast<std::size_t>(n);
}

inline std::string get_string(std::istream& in) {
  std::string s(get_length(in, 1u << 20), '\0');
  read_exact(in, s.data(), s.size());
  return s;
}

inline std::vector<double> get_f64s(std::istream& in) {
  std::vector<double> v(get_length(in));
  for (double& x : v) x = get_f64(in);
  return v;
}

inline std::vector<std::size_t> get_indices(std::istream& in) {
  std::vector<std::size_t> v(get_length(in));
  for (auto& x : v) x = static_cast<std::size_t>(get_u64(in));
  return v;
}

}  // namespace piqi::binio
