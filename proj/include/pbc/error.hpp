#pragma once

#include <stdexcept>
#include <string>

namespace pbc {

enum class ErrorKind {
  InvalidDimension,
  InvalidParameter,
  SingularSystem,
  DegenerateAnalyte,
  DegenerateRegression,
  DegenerateResponse,
  InvalidMetric,
  UndefinedCorrelation,
  Parse,
  Feasibility,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Library-wide exception. The kind lets callers (the CLI in particular)
/// map failures to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for failures of the numerical method itself (as opposed to bad
  /// input or I/O).
  bool is_degeneracy() const noexcept {
    switch (kind_) {
      case ErrorKind::SingularSystem:
      case ErrorKind::DegenerateAnalyte:
      case ErrorKind::DegenerateRegression:
      case ErrorKind::DegenerateResponse:
      case ErrorKind::UndefinedCorrelation:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorKind kind_;
};

}  // namespace pbc
