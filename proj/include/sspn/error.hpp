#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sspn {

enum class ErrorCode {
  InvalidSpn,
  DimensionMismatch,
  TraceMismatch,
  DegenerateEvidence,
  ZeroResponsibility,
  DegenerateData,
  ParseError,
  MissingValue,
  AllFeaturesDegenerate,
  InsufficientRows,
  TooFewRows,
  LengthMismatch,
  StructureInvalid,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; the code tells callers what failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpn: return "InvalidSpn";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TraceMismatch: return "TraceMismatch";
    case ErrorCode::DegenerateEvidence: return "DegenerateEvidence";
    case ErrorCode::ZeroResponsibility: return "ZeroResponsibility";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::AllFeaturesDegenerate: return "AllFeaturesDegenerate";
    case ErrorCode::InsufficientRows: return "InsufficientRows";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::StructureInvalid: return "StructureInvalid";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace sspn
