#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace glyphnet {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor/parameter dimensions disagree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf reached a tensor boundary.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line (or row/record) number; 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Checkpoint file unreadable, truncated, or of the wrong format version.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Text does not fit the page and the layout asks for an error.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace glyphnet
