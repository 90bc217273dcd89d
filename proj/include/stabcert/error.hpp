#pragma once

#include <stdexcept>
#include <string>

namespace stabcert {

enum class ErrorCode {
  InvalidInput,
  InfeasibleDualPoint,
  NotASubgradientPoint,
  RefusedUnconverged,
  NotAStationaryPoint,
  TooLarge,
};

const char* to_string(ErrorCode code);

/// Single exception type for the library; `code()` tells callers (and the CLI
/// exit-code mapping) what went wrong.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::InfeasibleDualPoint: return "InfeasibleDualPoint";
    case ErrorCode::NotASubgradientPoint: return "NotASubgradientPoint";
    case ErrorCode::RefusedUnconverged: return "RefusedUnconverged";
    case ErrorCode::NotAStationaryPoint: return "NotAStationaryPoint";
    case ErrorCode::TooLarge: return "TooLarge";
  }
  return "Unknown";
}

}  // namespace stabcert
