#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cofacil {

enum class ErrorCode {
  InvalidArgument,
  InvalidSchema,
  UnknownConcept,
  OutOfRange,
  MalformedRow,
  EmptySheet,
  MalformedTranscript,
  BackendUnavailable,
  UnparseableResponse,
  EmptyDataset,
  SingleClassDataset,
  DimensionMismatch,
  SchemaMismatch,
  InsufficientData,
  CorruptArtifact,
  SchemaVersionMismatch,
  MalformedExample,
  StaleEdit,
  UnknownSegment,
  UnknownSession,
  UnknownModel,
  InvalidGoals,
  OutOfOrderSegment,
  SessionClosed,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every recoverable failure in the library surfaces as this type; the code
// is what callers (HTTP layer, CLI) switch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cofacil
