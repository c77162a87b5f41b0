#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coin {

enum class ErrorCode {
  DegenerateConfiguration,
  SingularMatrix,
  PointAtInfinity,
  DimensionMismatch,
  EmptyMask,
  DegenerateRect,
  BackendFailure,
  EmptyIndex,
  DimMismatch,
  NoInitializationSource,
  InvalidTemplate,
  MissingFrame,
  InsufficientData,
  DegenerateTrajectory,
  Io,
  Config,
};

std::string_view to_string(ErrorCode code);

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
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::DegenerateRect: return "DegenerateRect";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NoInitializationSource: return "NoInitializationSource";
    case ErrorCode::InvalidTemplate: return "InvalidTemplate";
    case ErrorCode::MissingFrame: return "MissingFrame";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::DegenerateTrajectory: return "DegenerateTrajectory";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

}  // namespace coin
