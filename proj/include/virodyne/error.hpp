#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace virodyne {

enum class ErrorKind {
  InvalidArgument,
  InvalidResidue,
  SingularPoint,
  QuadratureFailure,
  OutOfDomain,
  OutOfRange,
  MissingChannelModel,
  EmptyObservation,
  Unidentifiable,
  NotConverged,
  ParseError,
  EmptyInput,
  LengthMismatch,
  InvalidParams,
  InvalidWeights,
  NoData,
  Config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidResidue: return "InvalidResidue";
    case ErrorKind::SingularPoint: return "SingularPoint";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::MissingChannelModel: return "MissingChannelModel";
    case ErrorKind::EmptyObservation: return "EmptyObservation";
    case ErrorKind::Unidentifiable: return "Unidentifiable";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::InvalidWeights: return "InvalidWeights";
    case ErrorKind::NoData: return "NoData";
    case ErrorKind::Config: return "Config";
  }
  return "Unknown";
}

/// Base class of every domain error raised by the library. `kind()` lets
/// callers dispatch without a dynamic_cast chain.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class QuadratureFailure : public Error {
 public:
  QuadratureFailure(double estimate, double error_bound)
      : Error(ErrorKind::QuadratureFailure,
              "adaptive quadrature did not converge (estimate " + std::to_string(estimate) +
                  ", error bound " + std::to_string(error_bound) + ")"),
        estimate_(estimate),
        error_bound_(error_bound) {}

  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error(ErrorKind::ParseError,
              "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class LengthMismatch : public Error {
 public:
  explicit LengthMismatch(std::vector<std::string> offenders)
      : Error(ErrorKind::LengthMismatch, "sequences of unequal length: " + join(offenders)),
        offenders_(std::move(offenders)) {}

  const std::vector<std::string>& offenders() const noexcept { return offenders_; }

 private:
  static std::string join(const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) {
      if (!out.empty()) out += ", ";
      out += id;
    }
    return out;
  }

  std::vector<std::string> offenders_;
};

/// Index-tagged failure from a batch evaluation.
struct PointError {
  std::size_t index;
  ErrorKind kind;
  std::string message;
};

class BatchError : public Error {
 public:
  explicit BatchError(std::vector<PointError> errors)
      : Error(errors.empty() ? ErrorKind::InvalidArgument : errors.front().kind,
              std::to_string(errors.size()) + " point(s) failed, first at index " +
                  (errors.empty() ? std::string("?") : std::to_string(errors.front().index))),
        errors_(std::move(errors)) {}

  const std::vector<PointError>& errors() const noexcept { return errors_; }

 private:
  std::vector<PointError> errors_;
};

}  // namespace virodyne
