#include "cofacil/error.hpp"

namespace cofacil {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidSchema: return "InvalidSchema";
    case ErrorCode::UnknownConcept: return "UnknownConcept";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::EmptySheet: return "EmptySheet";
    case ErrorCode::MalformedTranscript: return "MalformedTranscript";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::UnparseableResponse: return "UnparseableResponse";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::CorruptArtifact: return "CorruptArtifact";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::MalformedExample: return "MalformedExample";
    case ErrorCode::StaleEdit: return "StaleEdit";
    case ErrorCode::UnknownSegment: return "UnknownSegment";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::InvalidGoals: return "InvalidGoals";
    case ErrorCode::OutOfOrderSegment: return "OutOfOrderSegment";
    case ErrorCode::SessionClosed: return "SessionClosed";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace cofacil
