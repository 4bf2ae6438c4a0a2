#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace piqi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition (bad sizes, bad hyperparameters, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ImageError : public Error {
 public:
  enum class Kind { Unreadable, UnsupportedFormat, ZeroArea };

  ImageError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Cholesky factorization failed even after jitter escalation.
class IllConditioned : public Error {
 public:
  using Error::Error;
};

// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace piqi
