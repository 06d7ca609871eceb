#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "anno/annotation.hpp"
#include "common/frame.hpp"
#include "tgtrack/model.hpp"
#include "tgtrack/train.hpp"

namespace tgpt::testing {

// Smooth deterministic texture in [0, 1]: a few random plane waves, shifted
// by (dx, dy) pixels.
Frame wave_frame(int w, int h, std::uint64_t seed, double dx = 0, double dy = 0);

// Frames of a texture translating by `step` pixels per frame, with tracks
// following the motion. Every frame is annotated.
track::TrainClip translating_clip(int n_frames, int n_points, int size, std::uint64_t seed,
                                  anno::Vec2 step, anno::PointType type = anno::PointType::kTissue);

// Zeroes the text table and its projection; the residual path stays intact.
void zero_text(track::Model& m);

// Adds U(-scale, scale) to every entry.
void jitter(nn::Tensor& t, std::mt19937_64& rng, double scale);

// grad_check of the total loss on a 2-frame, 2-point clip against six sampled
// entries of every parameter group. Returns (group, worst error) pairs.
// Encoder groups use eps 1e-6 (relu kinks), the rest 1e-3 (tiny gradients).
std::vector<std::pair<std::string, double>> end_to_end_grad_errors();

}  // namespace tgpt::testing
