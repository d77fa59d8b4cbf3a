#pragma once

#include <stdexcept>
#include <string>

namespace pairnas {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or model dimensions disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced or consumed by a numeric routine.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A reduction or attention row has no unmasked entries.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Malformed text input. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pairnas
