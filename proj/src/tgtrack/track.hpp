#pragma once

#include <span>
#include <variant>
#include <vector>

#include "anno/annotation.hpp"
#include "common/frame.hpp"
#include "tgtrack/model.hpp"
#include "tgtrack/prediction.hpp"

namespace tgpt::track {

enum class TextMode { kGroundTruth, kPredicted, kNone };

// Text supplied to the refinement stage.
struct GroundTruthText {
  std::vector<std::vector<anno::PointStatus>> statuses;  // [frame][query]
};
struct PredictedText {};
struct NoText {};
using TextGuide = std::variant<GroundTruthText, PredictedText, NoText>;

// Hard argmax coarse positions (inference) or soft-argmax (training).
enum class CoarseMode { kHard, kSoft };

struct Query {
  anno::Vec2 xy;
  anno::PointType type = anno::PointType::kTissue;
};

struct FrameOutput {
  nn::Tensor coarse;   // [N, 2]
  nn::Tensor offsets;  // [N, 2]
  nn::Tensor refined;  // [N, 2]
  AttributePrediction attrs;
  std::vector<anno::PointStatus> predicted;  // argmax of the status head
  std::vector<anno::PointStatus> text;       // statuses fed to the text branch; empty without text
};

struct ClipForward {
  std::vector<FrameOutput> frames;
  std::vector<anno::PointType> types;
};

// Runs the model over every frame. At frame 0 the coarse position is the query
// itself; later frames use the coarse match selected by `coarse`, searched
// around the previous frame's refined estimate. A point judged hidden keeps
// its search centre; the judgement comes from `hold` ([frame][point]) when
// given, else from the status head.
ClipForward forward_clip(nn::Graph& g, const Model& m, std::span<const Frame> frames,
                         std::span<const Query> queries, const TextGuide& guide,
                         CoarseMode coarse,
                         const std::vector<std::vector<anno::PointStatus>>* hold = nullptr);

// Inference on a non-recording graph.
TrackPrediction track_clip(const Model& m, std::span<const Frame> frames,
                           std::span<const Query> queries, const TextGuide& guide);

std::vector<Query> queries_of(const anno::ClipAnnotation& clip);

// Text guide for `mode`; ground truth is held between annotated frames.
TextGuide guide_for(TextMode mode, const anno::ClipAnnotation& clip, int n_frames);

// ---- loss --------------------------------------------------------------------

struct LossWeights {
  double huber_delta = 6.0;
  double lambda_smooth = 1.0;
  double lambda_text = 1.0;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossTerms {
  nn::Tensor total;   // (point + smooth) + text
  nn::Tensor point;   // Huber over GT-visible annotated points
  nn::Tensor smooth;  // lambda_s * second differences over the whole trajectory
  nn::Tensor text;    // lambda_text * status cross-entropy summed over annotated frames
};

LossTerms total_loss(nn::Graph& g, const ClipForward& pred, const anno::ClipAnnotation& gt,
                     const LossWeights& w);

}  // namespace tgpt::track
