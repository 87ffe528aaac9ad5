#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace confmc {

/// Caller broke a documented precondition (bad dimensions, out-of-range
/// probability, empty mask where one is required).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a finite, well-defined result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or configuration. Line/column are 1-based; zero
/// means "not applicable".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line = 0, std::size_t column = 0);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace confmc
