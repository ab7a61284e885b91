#pragma once

#include <stdexcept>
#include <string>

namespace tvdcov {

enum class ErrorCode {
  PositionOutsideDomain,
  CoincidentRobots,
  InvalidDomain,
  IndexOutOfRange,
  UnknownDensity,
  InvalidDensity,
  EmptyPolygon,
  DegenerateSegment,
  NotAdjacent,
  EigensolveFailure,
  SingularSystem,
  InvalidScenario,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PositionOutsideDomain: return "PositionOutsideDomain";
    case ErrorCode::CoincidentRobots: return "CoincidentRobots";
    case ErrorCode::InvalidDomain: return "InvalidDomain";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::UnknownDensity: return "UnknownDensity";
    case ErrorCode::InvalidDensity: return "InvalidDensity";
    case ErrorCode::EmptyPolygon: return "EmptyPolygon";
    case ErrorCode::DegenerateSegment: return "DegenerateSegment";
    case ErrorCode::NotAdjacent: return "NotAdjacent";
    case ErrorCode::EigensolveFailure: return "EigensolveFailure";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
  }
  return "Unknown";
}

// All library failures are reported through this type; code() identifies the
// failure class so callers can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tvdcov
