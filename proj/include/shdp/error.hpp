#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace shdp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (carries the 1-based line number when known).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input violates a documented precondition (duplicate ids, bad flags, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, failed line searches and similar numerical breakdowns.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::vector<double> iterate = {})
      : Error(what), iterate_(std::move(iterate)) {}
  const std::vector<double>& iterate() const noexcept { return iterate_; }

 private:
  std::vector<double> iterate_;
};

/// Optimizer stopped at max_iters before meeting its gradient tolerance.
class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Broken internal invariant or misuse of a topic id.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace shdp
