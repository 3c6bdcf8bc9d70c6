#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace softcast {

/// Base class for recoverable errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (bad key, out-of-range value, unknown kind).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A value outside the domain of a function (e.g. a glucose reading <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Grid or checkpoint content that parses but violates its invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// NaN/inf detected during training or evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A metric requested on input where it is undefined (e.g. no samples).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Programming error: a precondition of an API call was not met.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace softcast
