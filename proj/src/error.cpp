#include "tractshape/error.hpp"

namespace tractshape {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidGeometry: return "InvalidGeometry";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::MissingMagic: return "MissingMagic";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::GridTooLarge: return "GridTooLarge";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::TooFewRows: return "TooFewRows";
  }
  return "UnknownError";
}

ErrorCategory error_category(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument:
      return ErrorCategory::Usage;
    case ErrorCode::GridTooLarge:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::ZeroVariance:
    case ErrorCode::DegenerateInput:
      return ErrorCategory::Numeric;
    default:
      return ErrorCategory::Data;
  }
}

}  // namespace tractshape
