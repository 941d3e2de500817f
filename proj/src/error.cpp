#include "pbc/error.hpp"

namespace pbc {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidDimension: return "invalid-dimension";
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::SingularSystem: return "singular-system";
    case ErrorKind::DegenerateAnalyte: return "degenerate-analyte";
    case ErrorKind::DegenerateRegression: return "degenerate-regression";
    case ErrorKind::DegenerateResponse: return "degenerate-response";
    case ErrorKind::InvalidMetric: return "invalid-metric";
    case ErrorKind::UndefinedCorrelation: return "undefined-correlation";
    case ErrorKind::Parse: return "parse-error";
    case ErrorKind::Feasibility: return "feasibility-error";
    case ErrorKind::Io: return "io-error";
  }
  return "unknown";
}

}  // namespace pbc
