#pragma once

#include <stdexcept>
#include <string>

namespace geoloss {

enum class ErrorCode {
  NonPositiveDepth,
  NotUnit,
  GridTooSmall,
  ResolutionMismatch,
  NonFiniteLoss,
  EmptyMask,
  NoIntersection,
  InvalidInput,
  Io,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// CLI can map it onto a stable exit status.
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
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::NotUnit: return "NotUnit";
    case ErrorCode::GridTooSmall: return "GridTooSmall";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NoIntersection: return "NoIntersection";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace geoloss
