#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kprop {

/// Base class for every failure raised by the library. The CLI maps these to
/// exit code 2 (data error).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number of the offending line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Non-finite objective, failed inner solve, or similar numerical breakdown.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace kprop
