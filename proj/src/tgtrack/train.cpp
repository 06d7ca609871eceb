#include "tgtrack/train.hpp"

#include <numeric>

namespace tgpt::track {

using nn::Graph;

LossTerms clip_loss(Graph& g, const Model& m, const TrainClip& clip, TextMode mode,
                    const LossWeights& w) {
  const std::vector<Query> queries = queries_of(clip.annotation);
  const int n_frames = static_cast<int>(clip.frames.size());
  const TextGuide guide = guide_for(mode, clip.annotation, n_frames);
  // Teacher forcing: the search window follows annotated visibility.
  const auto hold = anno::held_statuses(clip.annotation, n_frames);
  ClipForward fw = forward_clip(g, m, clip.frames, queries, guide, CoarseMode::kSoft, &hold);
  return total_loss(g, fw, clip.annotation, w);
}

double suite_loss(const Model& m, std::span<const TrainClip> clips, TextMode mode,
                  const LossWeights& w) {
  double acc = 0.0;
  for (const TrainClip& c : clips) {
    Graph g(false);
    acc += clip_loss(g, m, c, mode, w).total.item();
  }
  return acc;
}

std::vector<std::size_t> clip_schedule(std::size_t n_clips, int steps, std::uint64_t seed) {
  if (n_clips == 0) fail(ErrorCode::kInvalidConfig, "no training clips");
  std::mt19937_64 rng(seed ^ 0x7472616996e5ULL);
  std::vector<std::size_t> order, out;
  while (out.size() < static_cast<std::size_t>(std::max(steps, 0))) {
    order.resize(n_clips);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n_clips; i > 1; --i) {
      const auto j = static_cast<std::size_t>(nn::unit_uniform(rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    for (std::size_t k : order) {
      if (out.size() == static_cast<std::size_t>(steps)) break;
      out.push_back(k);
    }
  }
  return out;
}

std::vector<StepLog> train(Model& m, std::span<const TrainClip> clips, const TrainConfig& cfg,
                           const std::function<void(const StepLog&)>& on_step) {
  if (cfg.steps < 0) fail(ErrorCode::kInvalidConfig, "steps must be non-negative");
  const std::vector<std::size_t> schedule = clip_schedule(clips.size(), cfg.steps, cfg.seed);
  nn::OptimizerState opt(m.params().tensors(), cfg.adam);
  std::vector<StepLog> log;
  for (int s = 0; s < cfg.steps; ++s) {
    const TrainClip& clip = clips[schedule[s]];
    nn::zero_grad(m.params().tensors());
    Graph g;
    LossTerms terms = clip_loss(g, m, clip, cfg.text_mode, cfg.weights);
    StepLog entry{s, clip.annotation.clip_id, terms.total.item(), terms.point.item(),
                  terms.smooth.item(), terms.text.item()};
    if (on_step) on_step(entry);
    log.push_back(entry);
    if (terms.total.requires_grad()) g.backward(terms.total);
    nn::adam_step(m.params().tensors(), opt);
  }
  return log;
}

}  // namespace tgpt::track
