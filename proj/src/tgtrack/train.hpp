#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "numerics/optim.hpp"
#include "tgtrack/track.hpp"

namespace tgpt::track {

struct TrainClip {
  std::vector<Frame> frames;
  anno::ClipAnnotation annotation;
};

struct TrainConfig {
  int steps = 300;
  nn::AdamConfig adam;
  LossWeights weights;
  TextMode text_mode = TextMode::kGroundTruth;
  std::uint64_t seed = 0;  // clip order
};

struct StepLog {
  int step = 0;
  std::string clip_id;
  double total = 0, point = 0, smooth = 0, text = 0;
};

// Differentiable loss of one clip, training-mode forward (soft coarse match).
LossTerms clip_loss(nn::Graph& g, const Model& m, const TrainClip& clip, TextMode mode,
                    const LossWeights& w);

// Sum of clip losses, evaluated without recording.
double suite_loss(const Model& m, std::span<const TrainClip> clips, TextMode mode,
                  const LossWeights& w);

// Deterministic clip order: a fresh seeded permutation every epoch.
std::vector<std::size_t> clip_schedule(std::size_t n_clips, int steps, std::uint64_t seed);

// One Adam step per scheduled clip. `on_step` (optional) sees each step's loss
// before the update is applied.
std::vector<StepLog> train(Model& m, std::span<const TrainClip> clips, const TrainConfig& cfg,
                           const std::function<void(const StepLog&)>& on_step = {});

}  // namespace tgpt::track
