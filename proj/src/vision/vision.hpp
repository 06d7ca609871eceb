#pragma once

#include <array>
#include <random>
#include <span>
#include <vector>

#include "anno/annotation.hpp"
#include "common/frame.hpp"
#include "numerics/params.hpp"
#include "numerics/tensor.hpp"

// Trainable stand-in for the frozen visual branch: per-frame feature pyramid,
// query features, and patch-level coarse matching.
namespace tgpt::vision {

inline constexpr std::size_t kLevels = 3;

struct VisionConfig {
  std::size_t channels = 32;
  std::size_t patch = 8;
};

// Handles into a ParameterSet, all under the "vision." prefix.
struct VisionParams {
  nn::Tensor embed_w, embed_b;  // [C, patch*patch], [C]
  nn::Tensor mix_w, mix_b;      // [C, C], [C]
  std::array<nn::Tensor, 2> level_w, level_b;

  static VisionParams create(nn::ParameterSet& params, const VisionConfig& cfg,
                             std::mt19937_64& rng);
};

struct FeaturePyramid {
  std::array<nn::Tensor, kLevels> levels;  // level l: [H/(p*2^l), W/(p*2^l), C]
  int frame_width = 0;
  int frame_height = 0;
  std::size_t patch = 8;

  double stride(std::size_t level) const { return static_cast<double>(patch << level); }
};

// Constant [cells, patch*patch] matrix of centred pixel values.
nn::Tensor patch_matrix(const Frame& frame, std::size_t patch);

FeaturePyramid extract_pyramid(nn::Graph& g, const Frame& frame, const VisionParams& p,
                               const VisionConfig& cfg);

// Pixel position -> continuous grid coordinate of a pyramid level.
inline double to_grid(double px, double stride) { return px / stride - 0.5; }

// Query descriptors F_q [N, C]: level-0 features bilinearly sampled at the
// query pixels. Queries must lie inside the frame.
nn::Tensor query_features(nn::Graph& g, const FeaturePyramid& pyr0,
                          std::span<const anno::Vec2> queries);

// Cosine similarity of every query row against every cell: [N, H*W].
nn::Tensor cosine_map(nn::Graph& g, const nn::Tensor& fq, const nn::Tensor& level);

struct CoarseMatch {
  nn::Tensor xy;       // [N, 2] hard-argmax cell centres (constant)
  nn::Tensor soft_xy;  // [N, 2] softmax(corr / tau)-weighted centres (differentiable)
  nn::Tensor feat;     // [N, C] level-0 feature at the matched cell
  nn::Tensor corr;     // [N, H0*W0] cosine correlation
  std::vector<double> score;      // max correlation per query
  std::vector<std::size_t> cell;  // matched cell, ties to the smallest index
};

// Restricts the argmax and soft-argmax to cells whose centre lies within
// `radius` pixels (per axis) of a per-query centre. Correlation is still
// computed against every cell.
struct SearchWindow {
  std::vector<anno::Vec2> centres;
  double radius = 24.0;
};

// Without a window every cell is a candidate.
CoarseMatch coarse_match(nn::Graph& g, const nn::Tensor& fq, const FeaturePyramid& pyr,
                         double tau, const SearchWindow* window = nullptr);

}  // namespace tgpt::vision
