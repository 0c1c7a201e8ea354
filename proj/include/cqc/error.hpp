#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cqc {

enum class ErrorCode {
  EmptyArcList,
  ArcSizeOutOfRange,
  InvalidParams,
  TooLargeToEnumerate,
  NoWorkingMember,
  NoWorkingReadQuorum,
  IllegalTransition,
  MalformedTrace,
  ConfigError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyArcList: return "EmptyArcList";
    case ErrorCode::ArcSizeOutOfRange: return "ArcSizeOutOfRange";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::TooLargeToEnumerate: return "TooLargeToEnumerate";
    case ErrorCode::NoWorkingMember: return "NoWorkingMember";
    case ErrorCode::NoWorkingReadQuorum: return "NoWorkingReadQuorum";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::MalformedTrace: return "MalformedTrace";
    case ErrorCode::ConfigError: return "ConfigError";
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

}  // namespace cqc
