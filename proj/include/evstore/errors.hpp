#pragma once

#include <stdexcept>
#include <string>

namespace evstore {

enum class ErrorCode {
  DuplicateStream,
  UnknownStream,
  ConcurrencyConflict,
  ImmutabilityViolation,
  PositionOutOfRange,
  MalformedRecord,
  StoreCorrupt,
  UnknownFormatVersion,
  UnassignedStreamType,
  NonConformingEvent,
  UnknownCommandType,
  UnknownQuery,
  UnknownProjector,
  InvalidProjection,
  ToleranceExceeded,
  MissingUpcaster,
  TransformFailure,
  UnknownScriptTarget,
  InvalidArgument,
  IoError,
};

const char* error_code_name(ErrorCode code);

// Library failures are exceptions carrying a stable code so callers (and the
// CLI exit-code mapping) can dispatch without string matching. Domain
// rejections and schema violations are values, not errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace evstore
