#pragma once

#include <stdexcept>
#include <string>

namespace ebif {

enum class ErrorKind {
  SyntaxError,
  UnsupportedFunction,
  NonAffineArgument,
  TranscendentalConstant,
  DimensionMismatch,
  IndexOutOfRange,
  EmptySeed,
  NotStabilized,
  NotInvariant,
  MissingProjection,
  NonSquare,
  NonFinite,
  ScheduleInvalid,
  EmptySpan,
  SingularSylvester,
  SingularR,
  SweepDiverged,
  NonFiniteState,
  InvalidInput,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnsupportedFunction: return "UnsupportedFunction";
    case ErrorKind::NonAffineArgument: return "NonAffineArgument";
    case ErrorKind::TranscendentalConstant: return "TranscendentalConstant";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::EmptySeed: return "EmptySeed";
    case ErrorKind::NotStabilized: return "NotStabilized";
    case ErrorKind::NotInvariant: return "NotInvariant";
    case ErrorKind::MissingProjection: return "MissingProjection";
    case ErrorKind::NonSquare: return "NonSquare";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::ScheduleInvalid: return "ScheduleInvalid";
    case ErrorKind::EmptySpan: return "EmptySpan";
    case ErrorKind::SingularSylvester: return "SingularSylvester";
    case ErrorKind::SingularR: return "SingularR";
    case ErrorKind::SweepDiverged: return "SweepDiverged";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure with a 1-based column into the offending text.
class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, std::size_t column, const std::string& what)
      : Error(kind, "column " + std::to_string(column) + ": " + what), column_(column) {}

  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

}  // namespace ebif
