#pragma once

#include <stdexcept>
#include <string>

namespace fppgeo {

enum class ErrorCode {
  kInvalidDirection,
  kInvalidParameter,
  kNoTarget,
  kRange,
  kTruncatedPath,
  kWrongTarget,
  kMode,
  kConfig,
  kIo,
  kUnsupportedFormat,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidDirection: return "invalid direction";
    case ErrorCode::kInvalidParameter: return "invalid parameter";
    case ErrorCode::kNoTarget: return "no target in box";
    case ErrorCode::kRange: return "out of range";
    case ErrorCode::kTruncatedPath: return "truncated path";
    case ErrorCode::kWrongTarget: return "wrong target kind";
    case ErrorCode::kMode: return "mode error";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kIo: return "I/O error";
    case ErrorCode::kUnsupportedFormat: return "unsupported format";
  }
  return "error";
}

/// All library failures are reported through this type; `code()` identifies
/// the failure class, `what()` carries the diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fppgeo
