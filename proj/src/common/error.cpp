#include "common/error.hpp"

namespace tgpt {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "Ok";
    case ErrorCode::kMalformedDocument: return "MalformedDocument";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonPositiveDelta: return "NonPositiveDelta";
    case ErrorCode::kTrajectoryTooShort: return "TrajectoryTooShort";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kDetachedTensor: return "DetachedTensor";
    case ErrorCode::kMissingGrad: return "MissingGrad";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kTooFewClips: return "TooFewClips";
    case ErrorCode::kBadFrameShape: return "BadFrameShape";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kVocabularyMismatch: return "VocabularyMismatch";
    case ErrorCode::kFrameCoverageGap: return "FrameCoverageGap";
    case ErrorCode::kEmptyClip: return "EmptyClip";
    case ErrorCode::kZeroExtent: return "ZeroExtent";
    case ErrorCode::kNoVisiblePoints: return "NoVisiblePoints";
    case ErrorCode::kEmptyEval: return "EmptyEval";
    case ErrorCode::kNoEndpointGT: return "NoEndpointGT";
    case ErrorCode::kBadCheckpoint: return "BadCheckpoint";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace tgpt
