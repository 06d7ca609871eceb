#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tgpt {

// Every failure the library reports maps onto one of these categories. The
// C API surfaces the same values as integer status codes.
enum class ErrorCode {
  kOk = 0,
  kMalformedDocument,
  kSchemaViolation,
  kShapeMismatch,
  kNonPositiveDelta,
  kTrajectoryTooShort,
  kIndexOutOfRange,
  kDetachedTensor,
  kMissingGrad,
  kInvalidConfig,
  kTooFewClips,
  kBadFrameShape,
  kOutOfBounds,
  kVocabularyMismatch,
  kFrameCoverageGap,
  kEmptyClip,
  kZeroExtent,
  kNoVisiblePoints,
  kEmptyEval,
  kNoEndpointGT,
  kBadCheckpoint,
  kIo,
  kInvalidArgument,
};

std::string_view error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace tgpt
