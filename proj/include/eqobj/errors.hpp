#pragma once

#include <stdexcept>
#include <string>

namespace eqobj {

enum class ErrorKind {
  NotHermitian,
  NotPSD,
  NotNormalized,
  NonFinite,
  NumericalFailure,
  DimensionMismatch,
  DimensionOverflow,
  EmptyKeepSet,
  InvalidRank,
  InvalidDims,
  InvalidArgument,
  NotBlockDiagonal,
  NonPositiveWindow,
  EqualGapsDetected,
  DegenerateAfterRetries,
  DegenerateBranchStructure,
  ResonantEigenvalues,
  IncompleteGrid,
  ConfigParseError,
  IoError,
};

const char* to_string(ErrorKind kind);

/// Every library failure carries a kind so callers (the CLI in particular)
/// can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotHermitian: return "NotHermitian";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DimensionOverflow: return "DimensionOverflow";
    case ErrorKind::EmptyKeepSet: return "EmptyKeepSet";
    case ErrorKind::InvalidRank: return "InvalidRank";
    case ErrorKind::InvalidDims: return "InvalidDims";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NotBlockDiagonal: return "NotBlockDiagonal";
    case ErrorKind::NonPositiveWindow: return "NonPositiveWindow";
    case ErrorKind::EqualGapsDetected: return "EqualGapsDetected";
    case ErrorKind::DegenerateAfterRetries: return "DegenerateAfterRetries";
    case ErrorKind::DegenerateBranchStructure: return "DegenerateBranchStructure";
    case ErrorKind::ResonantEigenvalues: return "ResonantEigenvalues";
    case ErrorKind::IncompleteGrid: return "IncompleteGrid";
    case ErrorKind::ConfigParseError: return "ConfigParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace eqobj
