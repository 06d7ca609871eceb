#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "common/error.hpp"

namespace tgpt::anno {

enum class PointType { kTissue, kInstrument };

// The closed status vocabulary. Tissue points draw from the first seven
// entries' tissue subset, instrument points from the instrument subset; see
// tissue_statuses() / instrument_statuses().
enum class PointStatus {
  kClearView,
  kPulled,
  kReflection,
  kSmokeObscuration,
  kInstrumentObscuration,
  kTissueObscuration,
  kOutOfView,
  kExternalOcclusion,
  kSelfOcclusion,
};

inline constexpr std::size_t kStatusCount = 9;
inline constexpr std::size_t kTissueStatusCount = 7;
inline constexpr std::size_t kInstrumentStatusCount = 4;

enum class Scenario {
  kTissueDeformation,
  kInstrumentOcclusion,
  kCameraJitter,
  kSurfaceReflection,
  kCauterizationSmoke,
  kClean,
};

inline constexpr std::array<Scenario, 5> kChallengeScenarios = {
    Scenario::kTissueDeformation, Scenario::kInstrumentOcclusion,
    Scenario::kCameraJitter, Scenario::kSurfaceReflection,
    Scenario::kCauterizationSmoke};

enum class InstrumentType {
  kHarmonicAceCurvedShears,
  kCadiereForceps,
  kFenestratedBipolarForceps,
  kClipApplier,
  kClip,
  kTipUpFenestratedGrasper,
  kNeedleDriver,
};

inline constexpr std::size_t kInstrumentTypeCount = 7;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct InstrumentMeta {
  InstrumentType type = InstrumentType::kHarmonicAceCurvedShears;
  std::int64_t instance_id = 0;
  friend bool operator==(const InstrumentMeta&, const InstrumentMeta&) = default;
};

struct PointObservation {
  std::optional<Vec2> coord;  // absent == annotated invisible ("null")
  PointStatus status = PointStatus::kClearView;
  friend bool operator==(const PointObservation&, const PointObservation&) = default;
};

struct Track {
  PointType type = PointType::kTissue;
  std::optional<InstrumentMeta> instrument;
  std::vector<PointObservation> observations;  // one per clip frame index
  friend bool operator==(const Track&, const Track&) = default;
};

struct ClipAnnotation {
  std::string clip_id;
  int width = 0;
  int height = 0;
  double annotation_fps = 1.0;
  Scenario scenario = Scenario::kClean;
  std::vector<int> frame_indices;
  std::vector<Track> tracks;
  friend bool operator==(const ClipAnnotation&, const ClipAnnotation&) = default;
};

// ---- vocabulary ------------------------------------------------------------

std::string_view to_string(PointType t);
std::string_view to_string(PointStatus s);
std::string_view to_string(Scenario s);
std::string_view to_string(InstrumentType t);

std::optional<PointType> parse_point_type(std::string_view s);
std::optional<PointStatus> parse_status(std::string_view s);
std::optional<Scenario> parse_scenario(std::string_view s);
std::optional<InstrumentType> parse_instrument_type(std::string_view s);

std::span<const PointStatus> tissue_statuses();
std::span<const PointStatus> instrument_statuses();
std::span<const PointStatus> statuses_for(PointType t);

bool status_allowed(PointType t, PointStatus s);

// Row of `s` in the status head for `t`; nullopt when outside the vocabulary.
std::optional<std::size_t> head_index(PointType t, PointStatus s);
PointStatus status_from_head(PointType t, std::size_t index);

// Ground truth: visible iff a coordinate is present. Prediction side (no
// coordinate): obscuration, occlusion and out-of-view statuses are invisible.
bool visibility_of(PointStatus status, const std::optional<Vec2>& coord);

// ---- validation ------------------------------------------------------------

enum class ViolationCode {
  kNonPositiveExtent,
  kNonPositiveFps,
  kFrameIndicesNotAscending,
  kQueryFrameNotZero,
  kObservationCountMismatch,
  kVocabularyMismatch,
  kInstrumentMetaMismatch,
  kNegativeInstanceId,
  kDuplicateInstanceId,
  kCoordOutOfBounds,
  kQueryPointInvisible,
  kMissingField,
  kUnknownValue,
  kFrameMismatch,
  kWrongType,
};

std::string_view to_string(ViolationCode code);

struct Violation {
  ViolationCode code;
  int track = -1;  // -1 when not tied to a track
  int frame = -1;  // frame index (not position), -1 when not tied to a frame
  std::string detail;
};

std::vector<Violation> validate_clip(const ClipAnnotation& clip);

// Thrown by parse_clip for schema-level problems; carries the location.
class SchemaError : public Error {
 public:
  SchemaError(ViolationCode violation, std::string clip_id, int track, int frame,
              const std::string& detail);

  ViolationCode violation() const noexcept { return violation_; }
  const std::string& clip_id() const noexcept { return clip_id_; }
  int track() const noexcept { return track_; }
  int frame() const noexcept { return frame_; }

 private:
  ViolationCode violation_;
  std::string clip_id_;
  int track_;
  int frame_;
};

// ---- document format -------------------------------------------------------

inline constexpr std::string_view kClipExtension = ".vlspt.json";

// Structural parse only: the result may violate clip invariants.
ClipAnnotation parse_clip_unchecked(std::string_view document);

// Structural parse plus validate_clip; throws SchemaError on the first
// violation.
ClipAnnotation parse_clip(std::string_view document);

// Canonical rendering: fixed key order, 3-decimal floats, two-space indent.
std::string serialize_clip(const ClipAnnotation& clip);

// Rounds to the 3-decimal grid used on disk.
double quantize(double v);

// Per-frame status of each track with sample-and-hold between annotated
// frames: result[frame][track] for frames [0, n_frames).
std::vector<std::vector<PointStatus>> held_statuses(const ClipAnnotation& clip,
                                                    int n_frames);

}  // namespace tgpt::anno
