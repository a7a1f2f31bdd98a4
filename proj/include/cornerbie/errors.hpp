#pragma once

#include <stdexcept>
#include <string>

namespace cornerbie {

enum class ErrorCode {
  SelfIntersecting,
  DegenerateAngle,
  MeshInfeasible,
  AtCorner,
  CoincidentPoints,
  UnsupportedOrder,
  MaxDepthExceeded,
  RankDeficient,
  IllConditioned,
  ResidualTooLarge,
  MissingTable,
  DimensionMismatch,
  SingularMatrix,
  IncompatibleData,
  MaxLevels,
  UnresolvedCorner,
  TooLarge,
  InvalidArgument,
  ConfigError,
  IoError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SelfIntersecting: return "SelfIntersecting";
    case ErrorCode::DegenerateAngle: return "DegenerateAngle";
    case ErrorCode::MeshInfeasible: return "MeshInfeasible";
    case ErrorCode::AtCorner: return "AtCorner";
    case ErrorCode::CoincidentPoints: return "CoincidentPoints";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::MaxDepthExceeded: return "MaxDepthExceeded";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::ResidualTooLarge: return "ResidualTooLarge";
    case ErrorCode::MissingTable: return "MissingTable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::IncompatibleData: return "IncompatibleData";
    case ErrorCode::MaxLevels: return "MaxLevels";
    case ErrorCode::UnresolvedCorner: return "UnresolvedCorner";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cornerbie
