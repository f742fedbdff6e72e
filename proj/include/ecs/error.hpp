#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ecs {

enum class ErrorCode {
  EmptyInput,
  UnknownToken,
  ContextOverflow,
  NumericalError,
  MissingFiller,
  CaptureMissing,
  RecordError,
  SchemaError,
  ConfigError,
  MissingBaseline,
  EmptyRegion,
  IoError,
  WeightError,
  NoData,
  PreconditionError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::NumericalError: return "NumericalError";
    case ErrorCode::MissingFiller: return "MissingFiller";
    case ErrorCode::CaptureMissing: return "CaptureMissing";
    case ErrorCode::RecordError: return "RecordError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MissingBaseline: return "MissingBaseline";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::WeightError: return "WeightError";
    case ErrorCode::NoData: return "NoData";
    case ErrorCode::PreconditionError: return "PreconditionError";
  }
  return "Unknown";
}

// Every failure in the library is reported as an Error carrying a code, so
// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace ecs
