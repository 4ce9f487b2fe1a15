#include "evstore/errors.hpp"

namespace evstore {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateStream: return "DuplicateStream";
    case ErrorCode::UnknownStream: return "UnknownStream";
    case ErrorCode::ConcurrencyConflict: return "ConcurrencyConflict";
    case ErrorCode::ImmutabilityViolation: return "ImmutabilityViolation";
    case ErrorCode::PositionOutOfRange: return "PositionOutOfRange";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::StoreCorrupt: return "StoreCorrupt";
    case ErrorCode::UnknownFormatVersion: return "UnknownFormatVersion";
    case ErrorCode::UnassignedStreamType: return "UnassignedStreamType";
    case ErrorCode::NonConformingEvent: return "NonConformingEvent";
    case ErrorCode::UnknownCommandType: return "UnknownCommandType";
    case ErrorCode::UnknownQuery: return "UnknownQuery";
    case ErrorCode::UnknownProjector: return "UnknownProjector";
    case ErrorCode::InvalidProjection: return "InvalidProjection";
    case ErrorCode::ToleranceExceeded: return "ToleranceExceeded";
    case ErrorCode::MissingUpcaster: return "MissingUpcaster";
    case ErrorCode::TransformFailure: return "TransformFailure";
    case ErrorCode::UnknownScriptTarget: return "UnknownScriptTarget";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace evstore
