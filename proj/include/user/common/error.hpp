#pragma once

#include <stdexcept>
#include <string>

namespace user {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that does not follow a file schema. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Incompatible tensor shapes passed to a numeric op.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value detected in checked mode.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Configuration that fails validation (unknown key, bad type, out-of-range value).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace user
