#pragma once

#include <stdexcept>
#include <string>

namespace vidsal {

enum class ErrorCode {
  IoFailure,
  MalformedHeader,
  DimensionMismatch,
  NonFiniteValue,
  ZeroVector,
  MalformedRecord,
  InvalidTimestamp,
  CountMismatch,
  IndexOutOfRange,
  EmptyEventSet,
  LengthMismatch,
  TooShort,
  KTooLarge,
  EmptyDatastore,
  UnknownVideo,
  InvalidArgument,
};

inline const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::InvalidTimestamp: return "InvalidTimestamp";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyEventSet: return "EmptyEventSet";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::EmptyDatastore: return "EmptyDatastore";
    case ErrorCode::UnknownVideo: return "UnknownVideo";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "UnknownError";
}

/// Exception carrying a machine-checkable error code alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace vidsal
