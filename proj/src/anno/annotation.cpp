#include "anno/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace tgpt::anno {
namespace {

constexpr std::array<PointStatus, kTissueStatusCount> kTissue = {
    PointStatus::kClearView,          PointStatus::kPulled,
    PointStatus::kReflection,         PointStatus::kSmokeObscuration,
    PointStatus::kInstrumentObscuration, PointStatus::kTissueObscuration,
    PointStatus::kOutOfView};

constexpr std::array<PointStatus, kInstrumentStatusCount> kInstrument = {
    PointStatus::kClearView, PointStatus::kExternalOcclusion,
    PointStatus::kSelfOcclusion, PointStatus::kOutOfView};

constexpr std::array<std::string_view, kStatusCount> kStatusNames = {
    "Clear View",           "Pulled",
    "Reflection",           "Smoke Obscuration",
    "Instrument Obscuration", "Tissue Obscuration",
    "Out of View",          "External Occlusion",
    "Self-occlusion"};

constexpr std::array<std::string_view, 6> kScenarioNames = {
    "Tissue Deformation", "Instrument Occlusion", "Camera Jitter",
    "Surface Reflection", "Cauterization Smoke",  "Clean"};

constexpr std::array<std::string_view, kInstrumentTypeCount> kInstrumentNames = {
    "Harmonic Ace Curved Shears", "Cadiere Forceps",
    "Fenestrated Bipolar Forceps", "Clip Applier",
    "Clip",                        "Tip-Up Fenestrated Grasper",
    "Needle Driver"};

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::string_view, N>& names,
                        std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(PointType t) {
  return t == PointType::kTissue ? "Tissue" : "Instrument";
}
std::string_view to_string(PointStatus s) {
  return kStatusNames[static_cast<std::size_t>(s)];
}
std::string_view to_string(Scenario s) {
  return kScenarioNames[static_cast<std::size_t>(s)];
}
std::string_view to_string(InstrumentType t) {
  return kInstrumentNames[static_cast<std::size_t>(t)];
}

std::optional<PointType> parse_point_type(std::string_view s) {
  if (s == "Tissue") return PointType::kTissue;
  if (s == "Instrument") return PointType::kInstrument;
  return std::nullopt;
}
std::optional<PointStatus> parse_status(std::string_view s) {
  return lookup<PointStatus>(kStatusNames, s);
}
std::optional<Scenario> parse_scenario(std::string_view s) {
  return lookup<Scenario>(kScenarioNames, s);
}
std::optional<InstrumentType> parse_instrument_type(std::string_view s) {
  return lookup<InstrumentType>(kInstrumentNames, s);
}

std::span<const PointStatus> tissue_statuses() { return kTissue; }
std::span<const PointStatus> instrument_statuses() { return kInstrument; }
std::span<const PointStatus> statuses_for(PointType t) {
  return t == PointType::kTissue ? tissue_statuses() : instrument_statuses();
}

std::optional<std::size_t> head_index(PointType t, PointStatus s) {
  auto vocab = statuses_for(t);
  auto it = std::find(vocab.begin(), vocab.end(), s);
  if (it == vocab.end()) return std::nullopt;
  return static_cast<std::size_t>(it - vocab.begin());
}

bool status_allowed(PointType t, PointStatus s) {
  return head_index(t, s).has_value();
}

PointStatus status_from_head(PointType t, std::size_t index) {
  auto vocab = statuses_for(t);
  if (index >= vocab.size()) {
    fail(ErrorCode::kIndexOutOfRange,
         "status head index " + std::to_string(index) + " out of range for " +
             std::string(to_string(t)));
  }
  return vocab[index];
}

bool visibility_of(PointStatus status, const std::optional<Vec2>& coord) {
  if (coord.has_value()) return true;
  switch (status) {
    case PointStatus::kOutOfView:
    case PointStatus::kInstrumentObscuration:
    case PointStatus::kTissueObscuration:
    case PointStatus::kExternalOcclusion:
    case PointStatus::kSelfOcclusion:
      return false;
    default:
      return true;
  }
}

std::string_view to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::kNonPositiveExtent: return "NonPositiveExtent";
    case ViolationCode::kNonPositiveFps: return "NonPositiveFps";
    case ViolationCode::kFrameIndicesNotAscending: return "FrameIndicesNotAscending";
    case ViolationCode::kQueryFrameNotZero: return "QueryFrameNotZero";
    case ViolationCode::kObservationCountMismatch: return "ObservationCountMismatch";
    case ViolationCode::kVocabularyMismatch: return "VocabularyMismatch";
    case ViolationCode::kInstrumentMetaMismatch: return "InstrumentMetaMismatch";
    case ViolationCode::kNegativeInstanceId: return "NegativeInstanceId";
    case ViolationCode::kDuplicateInstanceId: return "DuplicateInstanceId";
    case ViolationCode::kCoordOutOfBounds: return "CoordOutOfBounds";
    case ViolationCode::kQueryPointInvisible: return "QueryPointInvisible";
    case ViolationCode::kMissingField: return "MissingField";
    case ViolationCode::kUnknownValue: return "UnknownValue";
    case ViolationCode::kFrameMismatch: return "FrameMismatch";
    case ViolationCode::kWrongType: return "WrongType";
  }
  return "Unknown";
}

SchemaError::SchemaError(ViolationCode violation, std::string clip_id, int track,
                         int frame, const std::string& detail)
    : Error(ErrorCode::kSchemaViolation,
            std::string(to_string(violation)) + " clip=" + clip_id +
                " track=" + std::to_string(track) +
                " frame=" + std::to_string(frame) +
                (detail.empty() ? "" : ": " + detail)),
      violation_(violation),
      clip_id_(std::move(clip_id)),
      track_(track),
      frame_(frame) {}

std::vector<Violation> validate_clip(const ClipAnnotation& clip) {
  std::vector<Violation> out;
  if (clip.width <= 0 || clip.height <= 0) {
    out.push_back({ViolationCode::kNonPositiveExtent, -1, -1,
                   std::to_string(clip.width) + "x" + std::to_string(clip.height)});
  }
  if (!(clip.annotation_fps > 0.0)) {
    out.push_back({ViolationCode::kNonPositiveFps, -1, -1, ""});
  }
  for (std::size_t i = 1; i < clip.frame_indices.size(); ++i) {
    if (clip.frame_indices[i] <= clip.frame_indices[i - 1]) {
      out.push_back({ViolationCode::kFrameIndicesNotAscending, -1,
                     clip.frame_indices[i], ""});
    }
  }
  if (clip.frame_indices.empty() || clip.frame_indices.front() != 0) {
    out.push_back({ViolationCode::kQueryFrameNotZero, -1,
                   clip.frame_indices.empty() ? -1 : clip.frame_indices.front(),
                   "first annotated frame must be 0"});
  }

  // (instrument type, instance id) -> owning track. Every track observes every
  // annotated frame, so per-frame uniqueness reduces to per-clip uniqueness.
  std::map<std::tuple<int, std::int64_t>, int> instances;
  for (std::size_t ti = 0; ti < clip.tracks.size(); ++ti) {
    const Track& tr = clip.tracks[ti];
    const int t = static_cast<int>(ti);
    const bool is_instr = tr.type == PointType::kInstrument;
    if (is_instr != tr.instrument.has_value()) {
      out.push_back({ViolationCode::kInstrumentMetaMismatch, t, -1,
                     is_instr ? "instrument track without instrument metadata"
                              : "tissue track with instrument metadata"});
    }
    if (tr.instrument && tr.instrument->instance_id < 0) {
      out.push_back({ViolationCode::kNegativeInstanceId, t, -1, ""});
    }
    if (tr.instrument) {
      auto key = std::make_tuple(static_cast<int>(tr.instrument->type),
                                 tr.instrument->instance_id);
      auto [it, inserted] = instances.emplace(key, t);
      if (!inserted) {
        out.push_back({ViolationCode::kDuplicateInstanceId, t,
                       clip.frame_indices.empty() ? -1 : clip.frame_indices.front(),
                       "instance id " + std::to_string(tr.instrument->instance_id) +
                           " already used by track " + std::to_string(it->second)});
      }
    }
    if (tr.observations.size() != clip.frame_indices.size()) {
      out.push_back({ViolationCode::kObservationCountMismatch, t, -1,
                     std::to_string(tr.observations.size()) + " observations for " +
                         std::to_string(clip.frame_indices.size()) + " frames"});
    }
    const std::size_t n = std::min(tr.observations.size(), clip.frame_indices.size());
    for (std::size_t j = 0; j < n; ++j) {
      const PointObservation& ob = tr.observations[j];
      const int frame = clip.frame_indices[j];
      if (!status_allowed(tr.type, ob.status)) {
        out.push_back({ViolationCode::kVocabularyMismatch, t, frame,
                       std::string(to_string(ob.status)) + " is not a " +
                           std::string(to_string(tr.type)) + " status"});
      }
      if (ob.coord) {
        const Vec2 c = *ob.coord;
        if (!(c.x >= 0.0 && c.x < clip.width && c.y >= 0.0 && c.y < clip.height)) {
          out.push_back({ViolationCode::kCoordOutOfBounds, t, frame, ""});
        }
      } else if (j == 0) {
        out.push_back({ViolationCode::kQueryPointInvisible, t, frame, ""});
      }
    }
  }
  return out;
}

std::vector<std::vector<PointStatus>> held_statuses(const ClipAnnotation& clip,
                                                    int n_frames) {
  std::vector<std::vector<PointStatus>> out(
      static_cast<std::size_t>(std::max(n_frames, 0)),
      std::vector<PointStatus>(clip.tracks.size(), PointStatus::kClearView));
  for (std::size_t ti = 0; ti < clip.tracks.size(); ++ti) {
    const Track& tr = clip.tracks[ti];
    std::size_t j = 0;
    for (int f = 0; f < n_frames; ++f) {
      while (j + 1 < clip.frame_indices.size() && clip.frame_indices[j + 1] <= f) ++j;
      if (j < tr.observations.size()) out[f][ti] = tr.observations[j].status;
    }
  }
  return out;
}

double quantize(double v) { return std::round(v * 1000.0) / 1000.0; }

}  // namespace tgpt::anno
