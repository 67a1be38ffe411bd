#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvrec {

enum class ErrorCode {
  ZeroVector,
  IndexOutOfRange,
  ShapeMismatch,
  InvalidArgument,
  EmptyInstance,
  MissingMask,
  UnknownClass,
  InsufficientShots,
  CorruptFile,
  MissingViews,
  ChannelMismatch,
  UnknownKey,
  NonFiniteLoss,
  UntrainedState,
  CoverageError,
  EmptyTable,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyInstance: return "EmptyInstance";
    case ErrorCode::MissingMask: return "MissingMask";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::InsufficientShots: return "InsufficientShots";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::MissingViews: return "MissingViews";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::UntrainedState: return "UntrainedState";
    case ErrorCode::CoverageError: return "CoverageError";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` is stable and
/// machine-readable, `what()` is "<Code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

inline void require(bool condition, ErrorCode code, const std::string& detail) {
  if (!condition) fail(code, detail);
}

}  // namespace mvrec
