#include "xicoal/error.hpp"

namespace xicoal {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyPoint: return "EmptyPoint";
    case ErrorKind::NotInSimplex: return "NotInSimplex";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::UnsupportedMeasure: return "UnsupportedMeasure";
    case ErrorKind::PatternTooLarge: return "PatternTooLarge";
    case ErrorKind::SupportTooLarge: return "SupportTooLarge";
    case ErrorKind::NonCdiMeasure: return "NonCdiMeasure";
    case ErrorKind::InfiniteCandidateSpeed: return "InfiniteCandidateSpeed";
    case ErrorKind::NonRegular: return "NonRegular";
    case ErrorKind::RateOverflow: return "RateOverflow";
    case ErrorKind::CouplingViolation: return "CouplingViolation";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::QuadratureFailure:
    case ErrorKind::Overflow:
    case ErrorKind::InfiniteCandidateSpeed:
    case ErrorKind::RateOverflow:
      return 3;
    case ErrorKind::CouplingViolation:
      return 4;
    case ErrorKind::IoError:
      return 1;
    default:
      return 2;
  }
}

}  // namespace xicoal
