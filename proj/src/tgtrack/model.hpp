#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "anno/annotation.hpp"
#include "numerics/params.hpp"
#include "numerics/tensor.hpp"
#include "vision/vision.hpp"

namespace tgpt::track {

using vision::kLevels;

struct ModelConfig {
  std::size_t channels = 32;
  std::size_t text_dim = 64;
  std::size_t heads = 2;
  std::size_t points = 4;  // sampling points per level and head
  double tau = 0.05;       // soft-argmax temperature
  double offset_scale = 8.0;  // refinement offsets are predicted in units of this many pixels
  double search_radius = 24.0;  // px around the previous estimate; <= 0 searches the whole frame
  std::uint64_t seed = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Table rows: point types first, then the nine statuses.
inline constexpr std::size_t kTextSymbols = 2 + anno::kStatusCount;
std::size_t text_row(anno::PointType t);
std::size_t text_row(anno::PointStatus s);

struct TextParams {
  nn::Tensor table;           // [11, D_t]
  nn::Tensor proj_w, proj_b;  // D_t -> C
};

// Single-head cross-attention, bias-free projections.
struct CrossAttnParams {
  nn::Tensor wq, wk, wv, wo;
};

// Per level: fused = W_feat * cell + w_corr * corr + b.
struct FuseParams {
  std::array<nn::Tensor, kLevels> w_feat, w_corr, b;
};

struct DeformParams {
  std::array<nn::Tensor, kLevels> offset_w, offset_b;  // [H*K*2, C], level-cell units
  nn::Tensor weight_w, weight_b;                       // [H*L*K, C]
  nn::Tensor value_w;                                  // [H, C/H, C]
  nn::Tensor out_w, out_b;                             // [C, C]
};

struct HeadParams {
  nn::Tensor type_w, type_b;      // 2
  nn::Tensor tissue_w, tissue_b;  // 7
  nn::Tensor instr_w, instr_b;    // 4
};

class Model {
 public:
  explicit Model(const ModelConfig& cfg = {});
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  vision::VisionConfig vision_config() const { return {cfg_.channels, 8}; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  vision::VisionParams vision;
  TextParams text;
  CrossAttnParams cross;
  FuseParams fuse;
  DeformParams attr_attn;
  HeadParams heads;
  DeformParams refine_attn;
  nn::Tensor offset_w, offset_b;  // [2, C], [2]

 private:
  ModelConfig cfg_;
  nn::ParameterSet params_;
};

// ---- text branch -------------------------------------------------------------

// [2, D_t]: type row and status row, each L2-normalised.
nn::Tensor encode_text(nn::Graph& g, const Model& m, anno::PointType type,
                       anno::PointStatus status);
// [N, 2, D_t]
nn::Tensor encode_text(nn::Graph& g, const Model& m, std::span<const anno::PointType> types,
                       std::span<const anno::PointStatus> statuses);

// ---- multi-scale correlation fusion -----------------------------------------

struct FusedLevel {
  nn::Tensor base;    // [H, W, C]: W_feat * cell + b
  nn::Tensor corr;    // [N, H, W, 1]: cosine against the query feature
  nn::Tensor w_corr;  // [C]
  double stride = 8;
};

// Per-query fused maps F_{p-h}, kept factorised: the map of query n is
// base + corr[n] * w_corr. Sampling the factors and recombining is exact by
// linearity of bilinear interpolation.
struct FusedFeatures {
  std::array<FusedLevel, kLevels> levels;
  std::size_t queries = 0;
};

FusedFeatures fuse_multiscale(nn::Graph& g, const Model& m, const nn::Tensor& fq,
                              const vision::CoarseMatch& match,
                              const vision::FeaturePyramid& pyr);

// Dense [N, H, W, C] map of one level.
nn::Tensor materialize(nn::Graph& g, const FusedFeatures& f, std::size_t level);

// loc [N, M, 2] in level-grid coordinates -> [N, M, C]
nn::Tensor sample_fused(nn::Graph& g, const FusedFeatures& f, std::size_t level,
                        const nn::Tensor& loc);

// ---- deformable attention ----------------------------------------------------

struct DeformOutput {
  nn::Tensor out;                                  // [N, C]
  nn::Tensor weights;                              // [N, heads, levels*points]
  std::array<nn::Tensor, kLevels> locations;       // [N, heads*points, 2] grid coords
};

DeformOutput deformable_attention(nn::Graph& g, const DeformParams& p, const ModelConfig& cfg,
                                  const nn::Tensor& query, const FusedFeatures& fused,
                                  const nn::Tensor& ref_xy);

// ---- attribute heads ---------------------------------------------------------

struct AttributePrediction {
  nn::Tensor hidden;             // [N, C]
  nn::Tensor type_logits;        // [2, N]
  nn::Tensor tissue_logits;      // [7, N_tissue], undefined when N_tissue == 0
  nn::Tensor instrument_logits;  // [4, N_instrument], undefined when N_instrument == 0
  std::vector<std::size_t> tissue_rows, instrument_rows;  // query index per column

  const nn::Tensor& status_logits(anno::PointType t) const {
    return t == anno::PointType::kTissue ? tissue_logits : instrument_logits;
  }
  // Hard argmax per query, mapped back to the closed vocabulary.
  std::vector<anno::PointStatus> argmax_status(std::size_t n) const;
};

AttributePrediction predict_attributes(nn::Graph& g, const Model& m, const nn::Tensor& fq,
                                       const FusedFeatures& fused, const nn::Tensor& ref_xy,
                                       std::span<const anno::PointType> types);

// ---- text-guided refinement --------------------------------------------------

struct RefineOutput {
  nn::Tensor refined;  // [N, 2] = coarse + offsets
  nn::Tensor offsets;  // [N, 2]
  nn::Tensor ftq;      // [N, C]
};

// Residual cross-attention from F_q to the projected text rows.
nn::Tensor text_attention(nn::Graph& g, const Model& m, const nn::Tensor& fq,
                          const nn::Tensor& ft);

// An undefined `ft` selects the no-text path (F_tq = F_q).
RefineOutput text_guided_refine(nn::Graph& g, const Model& m, const nn::Tensor& fq,
                                const nn::Tensor& ft, const FusedFeatures& fused,
                                const nn::Tensor& coarse_xy);

}  // namespace tgpt::track
