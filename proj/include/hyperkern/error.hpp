#pragma once

#include <stdexcept>
#include <string>

namespace hyperkern {

enum class ErrorKind {
  InvalidInput,
  UnsupportedEvaluation,
  NumericalFailure,
  ConvergenceFailure,
  ResourceLimit,
  FormatError,
  PipelineFailure,
  SlopeUndefined,
  ConfigError,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by iterative solvers that hit their iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double worst_violation)
      : Error(ErrorKind::ConvergenceFailure, what), worst_violation_(worst_violation) {}

  double worst_violation() const noexcept { return worst_violation_; }

 private:
  double worst_violation_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::InvalidInput, what);
}

}  // namespace hyperkern
