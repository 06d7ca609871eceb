#include "tgtrack/track.hpp"

#include <string>

#include "numerics/loss.hpp"
#include "numerics/ops.hpp"

namespace tgpt::track {

using anno::PointStatus;
using anno::PointType;
using nn::Graph;
using nn::Tensor;

namespace {

Tensor xy_tensor(std::span<const Query> queries) {
  std::vector<double> v;
  v.reserve(queries.size() * 2);
  for (const Query& q : queries) {
    v.push_back(q.xy.x);
    v.push_back(q.xy.y);
  }
  return Tensor::from({queries.size(), 2}, std::move(v));
}

}  // namespace

ClipForward forward_clip(Graph& g, const Model& m, std::span<const Frame> frames,
                         std::span<const Query> queries, const TextGuide& guide,
                         CoarseMode coarse, const std::vector<std::vector<PointStatus>>* hold) {
  if (frames.empty()) fail(ErrorCode::kEmptyClip, "clip has no frames");
  if (queries.empty()) fail(ErrorCode::kEmptyClip, "clip has no query points");
  if (const auto* gt = std::get_if<GroundTruthText>(&guide)) {
    if (gt->statuses.size() < frames.size()) {
      fail(ErrorCode::kFrameCoverageGap, "ground-truth text covers " +
                                             std::to_string(gt->statuses.size()) + " of " +
                                             std::to_string(frames.size()) + " frames");
    }
  }
  if (hold && hold->size() < frames.size()) {
    fail(ErrorCode::kFrameCoverageGap, "hold statuses cover " + std::to_string(hold->size()) + " of " +
                                           std::to_string(frames.size()) + " frames");
  }
  const vision::VisionConfig vcfg = m.vision_config();
  std::vector<anno::Vec2> qxy;
  ClipForward out;
  for (const Query& q : queries) {
    qxy.push_back(q.xy);
    out.types.push_back(q.type);
  }
  const std::size_t n = queries.size();

  vision::FeaturePyramid pyr0 = vision::extract_pyramid(g, frames[0], m.vision, vcfg);
  Tensor fq = vision::query_features(g, pyr0, qxy);
  vision::SearchWindow window{qxy, m.config().search_radius};
  const bool windowed = m.config().search_radius > 0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    vision::FeaturePyramid pyr =
        t == 0 ? pyr0 : vision::extract_pyramid(g, frames[t], m.vision, vcfg);
    vision::CoarseMatch match =
        vision::coarse_match(g, fq, pyr, m.config().tau, windowed ? &window : nullptr);
    FusedFeatures fused = fuse_multiscale(g, m, fq, match, pyr);

    FrameOutput f;
    f.coarse = t == 0 ? xy_tensor(queries) : coarse == CoarseMode::kSoft ? match.soft_xy : match.xy;
    f.attrs = predict_attributes(g, m, fq, fused, f.coarse, out.types);
    f.predicted = f.attrs.argmax_status(n);
    Tensor ft;
    if (const auto* gt = std::get_if<GroundTruthText>(&guide)) {
      f.text = gt->statuses[t];
      if (f.text.size() != n) {
        fail(ErrorCode::kShapeMismatch, "ground-truth text has " + std::to_string(f.text.size()) +
                                            " statuses for " + std::to_string(n) + " queries");
      }
    } else if (std::holds_alternative<PredictedText>(guide)) {
      f.text = f.predicted;
    }
    if (!f.text.empty()) ft = encode_text(g, m, out.types, f.text);
    RefineOutput r = text_guided_refine(g, m, fq, ft, fused, f.coarse);
    f.offsets = r.offsets;
    f.refined = r.refined;
    // Text never enters this rule, so zeroed text tracks like no text.
    const std::vector<PointStatus>& judged = hold ? (*hold)[t] : f.predicted;
    for (std::size_t i = 0; i < n; ++i) {
      if (anno::visibility_of(judged.at(i), std::nullopt)) {
        window.centres[i] = {f.refined[2 * i], f.refined[2 * i + 1]};
      }
    }
    out.frames.push_back(std::move(f));
  }
  return out;
}

TrackPrediction track_clip(const Model& m, std::span<const Frame> frames,
                           std::span<const Query> queries, const TextGuide& guide) {
  Graph g(false);
  ClipForward fw = forward_clip(g, m, frames, queries, guide, CoarseMode::kHard);
  TrackPrediction p;
  p.width = frames[0].width;
  p.height = frames[0].height;
  for (const Query& q : queries) {
    p.queries.push_back(q.xy);
    p.types.push_back(q.type);
  }
  for (std::size_t t = 0; t < fw.frames.size(); ++t) {
    const FrameOutput& f = fw.frames[t];
    p.frames.push_back(static_cast<int>(t));
    std::vector<PredictedPoint> row;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      PredictedPoint pt;
      pt.coord = {f.refined[2 * i], f.refined[2 * i + 1]};
      pt.coarse = {f.coarse[2 * i], f.coarse[2 * i + 1]};
      pt.offset = {f.offsets[2 * i], f.offsets[2 * i + 1]};
      pt.status = f.predicted[i];
      pt.visible = anno::visibility_of(f.predicted[i], std::nullopt);
      row.push_back(pt);
    }
    p.points.push_back(std::move(row));
  }
  return p;
}

std::vector<Query> queries_of(const anno::ClipAnnotation& clip) {
  std::vector<Query> qs;
  for (const anno::Track& t : clip.tracks) {
    if (t.observations.empty() || !t.observations[0].coord) {
      fail(ErrorCode::kSchemaViolation, clip.clip_id + ": query point is not visible at frame 0");
    }
    qs.push_back({*t.observations[0].coord, t.type});
  }
  return qs;
}

TextGuide guide_for(TextMode mode, const anno::ClipAnnotation& clip, int n_frames) {
  switch (mode) {
    case TextMode::kGroundTruth: return GroundTruthText{anno::held_statuses(clip, n_frames)};
    case TextMode::kPredicted: return PredictedText{};
    case TextMode::kNone: break;
  }
  return NoText{};
}

LossTerms total_loss(Graph& g, const ClipForward& pred, const anno::ClipAnnotation& gt,
                     const LossWeights& w) {
  const std::size_t n = gt.tracks.size();
  if (pred.types.size() != n) {
    fail(ErrorCode::kShapeMismatch, "loss: " + std::to_string(pred.types.size()) +
                                        " predicted tracks vs " + std::to_string(n) + " annotated");
  }
  std::vector<Tensor> residuals;
  Tensor text;
  for (std::size_t j = 0; j < gt.frame_indices.size(); ++j) {
    const int frame = gt.frame_indices[j];
    if (frame < 0 || static_cast<std::size_t>(frame) >= pred.frames.size()) {
      fail(ErrorCode::kFrameCoverageGap, "prediction has no frame " + std::to_string(frame));
    }
    const FrameOutput& f = pred.frames[frame];

    std::vector<std::size_t> rows;
    std::vector<double> target;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = gt.tracks[i].observations.at(j).coord;
      if (!c) continue;
      rows.push_back(i);
      target.push_back(c->x);
      target.push_back(c->y);
    }
    if (!rows.empty()) {
      Tensor picked = nn::gather_rows(g, f.refined, rows);
      residuals.push_back(nn::sub(g, picked, Tensor::from({rows.size(), 2}, std::move(target))));
    }

    // Mean cross-entropy over all N points of the frame, assembled from the
    // two heads in proportion to their point counts.
    Tensor frame_ce;
    for (PointType type : {PointType::kTissue, PointType::kInstrument}) {
      const auto& cols = type == PointType::kTissue ? f.attrs.tissue_rows : f.attrs.instrument_rows;
      if (cols.empty()) continue;
      std::vector<std::size_t> targets;
      for (std::size_t i : cols) {
        const PointStatus s = gt.tracks.at(i).observations.at(j).status;
        auto idx = anno::head_index(type, s);
        if (!idx) fail(ErrorCode::kVocabularyMismatch, "loss: status outside the head vocabulary");
        targets.push_back(*idx);
      }
      Tensor ce = nn::cross_entropy(g, f.attrs.status_logits(type), targets);
      if (cols.size() != n) {
        ce = nn::scalar_mul(g, ce, static_cast<double>(cols.size()) / static_cast<double>(n));
      }
      frame_ce = frame_ce.defined() ? nn::add(g, frame_ce, ce) : ce;
    }
    if (frame_ce.defined()) text = text.defined() ? nn::add(g, text, frame_ce) : frame_ce;
  }

  LossTerms terms;
  terms.point = residuals.empty()
                    ? Tensor::scalar(0.0)
                    : nn::huber(g, residuals.size() == 1 ? residuals[0] : nn::concat(g, residuals, 0),
                                w.huber_delta);
  if (pred.frames.size() >= 3) {
    std::vector<Tensor> traj;
    for (const FrameOutput& f : pred.frames) traj.push_back(nn::reshape(g, f.refined, {1, n, 2}));
    terms.smooth = nn::scalar_mul(g, nn::second_diff_l1(g, nn::concat(g, traj, 0)), w.lambda_smooth);
  } else {
    terms.smooth = Tensor::scalar(0.0);  // no interior frames
  }
  terms.text = text.defined() ? nn::scalar_mul(g, text, w.lambda_text) : Tensor::scalar(0.0);
  terms.total = nn::add(g, nn::add(g, terms.point, terms.smooth), terms.text);
  return terms;
}

}  // namespace tgpt::track
