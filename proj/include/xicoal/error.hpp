#pragma once

#include <stdexcept>
#include <string>

namespace xicoal {

enum class ErrorKind {
  EmptyPoint,
  NotInSimplex,
  ParseError,
  ValidationError,
  QuadratureFailure,
  Overflow,
  UnsupportedMeasure,
  PatternTooLarge,
  SupportTooLarge,
  NonCdiMeasure,
  InfiniteCandidateSpeed,
  NonRegular,
  RateOverflow,
  CouplingViolation,
  IoError,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// CLI exit status: 2 validation, 3 numerical, 4 coupling, 1 I/O.
int exit_code(ErrorKind kind);

}  // namespace xicoal
