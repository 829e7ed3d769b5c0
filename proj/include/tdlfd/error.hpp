#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tdlfd {

enum class ErrorCode {
  InvalidConfig,
  InvalidSpec,
  DimensionMismatch,
  EmptyShape,
  SingularUpdate,
  SingularSystem,
  DegenerateData,
  DegenerateInput,
  EmptyInput,
  ParseError,
  EmptyMesh,
  ProjectionFailure,
  IncompleteContext,
  EmptyRecording,
  SchemaMismatch,
  IoError,
  ProtocolError,
  BindFailure,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI, the teleop protocol) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tdlfd
