#include "tgtrack/model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "numerics/ops.hpp"

namespace tgpt::track {

using anno::PointStatus;
using anno::PointType;
using nn::Graph;
using nn::Tensor;

namespace {

DeformParams make_deform(nn::ParameterSet& ps, const std::string& prefix, const ModelConfig& cfg,
                         std::mt19937_64& rng) {
  const std::size_t c = cfg.channels, h = cfg.heads, k = cfg.points;
  if (h == 0 || k == 0 || c % h != 0) {
    fail(ErrorCode::kInvalidConfig, "channels must be divisible by heads, heads and points > 0");
  }
  DeformParams p;
  for (std::size_t l = 0; l < kLevels; ++l) {
    const std::string base = prefix + ".offset" + std::to_string(l);
    p.offset_w[l] = ps.add_uniform(base + ".w", {h * k * 2, c}, c, rng);
    // Initial sampling pattern: a ring of radius one cell around the reference.
    Tensor& b = ps.add_zeros(base + ".b", {h * k * 2});
    for (std::size_t j = 0; j < h * k; ++j) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(h * k);
      b.mutable_values()[2 * j] = std::cos(a);
      b.mutable_values()[2 * j + 1] = std::sin(a);
    }
    p.offset_b[l] = b;
  }
  p.weight_w = ps.add_uniform(prefix + ".weight.w", {h * kLevels * k, c}, c, rng);
  p.weight_b = ps.add_zeros(prefix + ".weight.b", {h * kLevels * k});
  p.value_w = ps.add_uniform(prefix + ".value.w", {h, c / h, c}, c, rng);
  p.out_w = ps.add_uniform(prefix + ".out.w", {c, c}, c, rng);
  p.out_b = ps.add_zeros(prefix + ".out.b", {c});
  return p;
}

void check_rows(const Tensor& t, std::size_t n, std::size_t c, const char* what) {
  if (t.rank() != 2 || t.dim(0) != n || t.dim(1) != c) {
    fail(ErrorCode::kShapeMismatch, std::string(what) + ": got " + nn::shape_str(t.shape()) +
                                        ", expected " + nn::shape_str({n, c}));
  }
}

}  // namespace

std::size_t text_row(PointType t) { return t == PointType::kTissue ? 0 : 1; }
std::size_t text_row(PointStatus s) { return 2 + static_cast<std::size_t>(s); }

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  if (cfg.channels == 0 || cfg.text_dim == 0 || !(cfg.tau > 0) || !std::isfinite(cfg.offset_scale)) {
    fail(ErrorCode::kInvalidConfig, "model sizes must be positive and tau > 0");
  }
  std::mt19937_64 rng(cfg.seed);
  const std::size_t c = cfg.channels, dt = cfg.text_dim;
  vision = vision::VisionParams::create(params_, vision_config(), rng);

  text.table = params_.add_uniform("text.table", {kTextSymbols, dt}, 1, rng);
  text.proj_w = params_.add_uniform("text.proj.w", {c, dt}, dt, rng);
  text.proj_b = params_.add_zeros("text.proj.b", {c});

  cross.wq = params_.add_uniform("cross.q.w", {c, c}, c, rng);
  cross.wk = params_.add_uniform("cross.k.w", {c, c}, c, rng);
  cross.wv = params_.add_uniform("cross.v.w", {c, c}, c, rng);
  cross.wo = params_.add_uniform("cross.o.w", {c, c}, c, rng);

  for (std::size_t l = 0; l < kLevels; ++l) {
    const std::string base = "fuse.level" + std::to_string(l);
    fuse.w_feat[l] = params_.add_uniform(base + ".feat.w", {c, c}, c + 1, rng);
    fuse.w_corr[l] = params_.add_uniform(base + ".corr.w", {c}, c + 1, rng);
    fuse.b[l] = params_.add_zeros(base + ".b", {c});
  }

  attr_attn = make_deform(params_, "attr.attn", cfg, rng);
  heads.type_w = params_.add_uniform("attr.type.w", {2, c}, c, rng);
  heads.type_b = params_.add_zeros("attr.type.b", {2});
  heads.tissue_w = params_.add_uniform("attr.tissue.w", {anno::kTissueStatusCount, c}, c, rng);
  heads.tissue_b = params_.add_zeros("attr.tissue.b", {anno::kTissueStatusCount});
  heads.instr_w = params_.add_uniform("attr.instrument.w", {anno::kInstrumentStatusCount, c}, c, rng);
  heads.instr_b = params_.add_zeros("attr.instrument.b", {anno::kInstrumentStatusCount});

  refine_attn = make_deform(params_, "refine.attn", cfg, rng);
  // Zero-initialised so that an untrained model reproduces the coarse match.
  offset_w = params_.add_zeros("refine.offset.w", {2, c});
  offset_b = params_.add_zeros("refine.offset.b", {2});
}

// ---- text --------------------------------------------------------------------

Tensor encode_text(Graph& g, const Model& m, PointType type, PointStatus status) {
  if (!anno::status_allowed(type, status)) {
    fail(ErrorCode::kVocabularyMismatch, std::string(anno::to_string(status)) +
                                             " is not a " + std::string(anno::to_string(type)) +
                                             " status");
  }
  const std::size_t rows[2] = {text_row(type), text_row(status)};
  return nn::l2_normalize(g, nn::gather_rows(g, m.text.table, rows));
}

Tensor encode_text(Graph& g, const Model& m, std::span<const PointType> types,
                   std::span<const PointStatus> statuses) {
  if (types.size() != statuses.size() || types.empty()) {
    fail(ErrorCode::kShapeMismatch, "encode_text: " + std::to_string(types.size()) + " types vs " +
                                        std::to_string(statuses.size()) + " statuses");
  }
  std::vector<std::size_t> rows;
  rows.reserve(types.size() * 2);
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (!anno::status_allowed(types[i], statuses[i])) {
      fail(ErrorCode::kVocabularyMismatch, std::string(anno::to_string(statuses[i])) +
                                               " is not a " +
                                               std::string(anno::to_string(types[i])) + " status");
    }
    rows.push_back(text_row(types[i]));
    rows.push_back(text_row(statuses[i]));
  }
  Tensor t = nn::gather_rows(g, m.text.table, rows);
  return nn::l2_normalize(g, nn::reshape(g, t, {types.size(), 2, m.config().text_dim}));
}

// ---- fusion ------------------------------------------------------------------

FusedFeatures fuse_multiscale(Graph& g, const Model& m, const Tensor& fq,
                              const vision::CoarseMatch& match, const vision::FeaturePyramid& pyr) {
  const std::size_t c = m.config().channels;
  if (fq.rank() != 2 || fq.dim(1) != c || pyr.levels[0].dim(2) != c) {
    fail(ErrorCode::kShapeMismatch, "fuse_multiscale: query features " + nn::shape_str(fq.shape()) +
                                        " vs level " + nn::shape_str(pyr.levels[0].shape()));
  }
  const std::size_t n = fq.dim(0);
  FusedFeatures f;
  f.queries = n;
  for (std::size_t l = 0; l < kLevels; ++l) {
    const Tensor& grid = pyr.levels[l];
    const std::size_t h = grid.dim(0), w = grid.dim(1);
    Tensor corr = l == 0 ? match.corr : vision::cosine_map(g, fq, grid);
    if (corr.rank() != 2 || corr.dim(0) != n || corr.dim(1) != h * w) {
      fail(ErrorCode::kShapeMismatch, "fuse_multiscale: correlation " + nn::shape_str(corr.shape()) +
                                          " vs level " + nn::shape_str(grid.shape()));
    }
    FusedLevel& lv = f.levels[l];
    lv.base = nn::linear(g, grid, m.fuse.w_feat[l], m.fuse.b[l]);
    lv.corr = nn::reshape(g, corr, {n, h, w, 1});
    lv.w_corr = m.fuse.w_corr[l];
    lv.stride = pyr.stride(l);
  }
  return f;
}

Tensor materialize(Graph& g, const FusedFeatures& f, std::size_t level) {
  const FusedLevel& lv = f.levels.at(level);
  return nn::add(g, lv.base, nn::mul(g, lv.corr, lv.w_corr));
}

Tensor sample_fused(Graph& g, const FusedFeatures& f, std::size_t level, const Tensor& loc) {
  const FusedLevel& lv = f.levels.at(level);
  if (loc.rank() != 3 || loc.dim(0) != f.queries || loc.dim(2) != 2) {
    fail(ErrorCode::kShapeMismatch, "sample_fused: locations " + nn::shape_str(loc.shape()) +
                                        " for " + std::to_string(f.queries) + " queries");
  }
  const std::size_t n = loc.dim(0), s = loc.dim(1), c = lv.base.dim(2);
  Tensor base = nn::bilinear_sample(g, lv.base, nn::reshape(g, loc, {n * s, 2}));
  Tensor corr = nn::bilinear_sample(g, lv.corr, loc);  // [N, S, 1]
  return nn::add(g, nn::reshape(g, base, {n, s, c}), nn::mul(g, corr, lv.w_corr));
}

// ---- deformable attention ----------------------------------------------------

DeformOutput deformable_attention(Graph& g, const DeformParams& p, const ModelConfig& cfg,
                                  const Tensor& query, const FusedFeatures& fused,
                                  const Tensor& ref_xy) {
  const std::size_t n = fused.queries, c = cfg.channels, h = cfg.heads, k = cfg.points;
  check_rows(query, n, c, "deformable_attention query");
  check_rows(ref_xy, n, 2, "deformable_attention reference");

  DeformOutput out;
  std::vector<Tensor> per_level;
  for (std::size_t l = 0; l < kLevels; ++l) {
    const double stride = fused.levels[l].stride;
    Tensor ref = nn::add_scalar(g, nn::scalar_mul(g, ref_xy, 1.0 / stride), -0.5);
    Tensor off = nn::reshape(g, nn::linear(g, query, p.offset_w[l], p.offset_b[l]), {n, h * k, 2});
    out.locations[l] = nn::add(g, off, nn::reshape(g, ref, {n, 1, 2}));
    Tensor samples = sample_fused(g, fused, l, out.locations[l]);  // [N, H*K, C]
    per_level.push_back(nn::reshape(g, samples, {n, h, k, c}));
  }
  Tensor samples = nn::concat(g, per_level, 2);  // [N, H, L*K, C]
  Tensor logits = nn::reshape(g, nn::linear(g, query, p.weight_w, p.weight_b), {n, h, kLevels * k});
  out.weights = nn::softmax(g, logits, 2);
  Tensor per_head = nn::weighted_sum(g, out.weights, samples);   // [N, H, C]
  Tensor values = nn::grouped_linear(g, per_head, p.value_w);    // [N, H, C/H]
  out.out = nn::linear(g, nn::reshape(g, values, {n, c}), p.out_w, p.out_b);
  return out;
}

// ---- attributes --------------------------------------------------------------

std::vector<PointStatus> AttributePrediction::argmax_status(std::size_t n) const {
  std::vector<PointStatus> result(n, PointStatus::kClearView);
  auto fill = [&](const Tensor& logits, const std::vector<std::size_t>& rows, PointType t) {
    if (rows.empty()) return;
    const std::size_t classes = logits.dim(0), cols = logits.dim(1);
    for (std::size_t j = 0; j < cols; ++j) {
      std::size_t best = 0;
      for (std::size_t r = 1; r < classes; ++r)
        if (logits[r * cols + j] > logits[best * cols + j]) best = r;
      result.at(rows[j]) = anno::status_from_head(t, best);
    }
  };
  fill(tissue_logits, tissue_rows, PointType::kTissue);
  fill(instrument_logits, instrument_rows, PointType::kInstrument);
  return result;
}

AttributePrediction predict_attributes(Graph& g, const Model& m, const Tensor& fq,
                                       const FusedFeatures& fused, const Tensor& ref_xy,
                                       std::span<const PointType> types) {
  if (types.size() != fused.queries) {
    fail(ErrorCode::kShapeMismatch, "predict_attributes: " + std::to_string(types.size()) +
                                        " point types for " + std::to_string(fused.queries) +
                                        " queries");
  }
  AttributePrediction a;
  for (std::size_t i = 0; i < types.size(); ++i) {
    switch (types[i]) {
      case PointType::kTissue: a.tissue_rows.push_back(i); break;
      case PointType::kInstrument: a.instrument_rows.push_back(i); break;
      default: fail(ErrorCode::kVocabularyMismatch, "unknown point type");
    }
  }
  a.hidden = deformable_attention(g, m.attr_attn, m.config(), fq, fused, ref_xy).out;
  a.type_logits = nn::transpose(g, nn::linear(g, a.hidden, m.heads.type_w, m.heads.type_b));
  if (!a.tissue_rows.empty()) {
    Tensor hs = nn::gather_rows(g, a.hidden, a.tissue_rows);
    a.tissue_logits = nn::transpose(g, nn::linear(g, hs, m.heads.tissue_w, m.heads.tissue_b));
  }
  if (!a.instrument_rows.empty()) {
    Tensor hs = nn::gather_rows(g, a.hidden, a.instrument_rows);
    a.instrument_logits = nn::transpose(g, nn::linear(g, hs, m.heads.instr_w, m.heads.instr_b));
  }
  return a;
}

// ---- refinement --------------------------------------------------------------

Tensor text_attention(Graph& g, const Model& m, const Tensor& fq, const Tensor& ft) {
  const std::size_t c = m.config().channels;
  const std::size_t n = fq.dim(0);
  if (ft.rank() != 3 || ft.dim(0) != n || ft.dim(2) != m.config().text_dim) {
    fail(ErrorCode::kShapeMismatch, "text_attention: text " + nn::shape_str(ft.shape()) +
                                        " for queries " + nn::shape_str(fq.shape()));
  }
  Tensor proj = nn::linear(g, ft, m.text.proj_w, m.text.proj_b);  // [N, R, C]
  Tensor q = nn::linear(g, fq, m.cross.wq, Tensor());
  Tensor k = nn::linear(g, proj, m.cross.wk, Tensor());
  Tensor v = nn::linear(g, proj, m.cross.wv, Tensor());
  Tensor scores = nn::sum_last(g, nn::mul(g, k, nn::reshape(g, q, {n, 1, c})));  // [N, R]
  scores = nn::scalar_mul(g, scores, 1.0 / std::sqrt(static_cast<double>(c)));
  Tensor attn = nn::softmax(g, scores, 1);
  Tensor ctx = nn::weighted_sum(g, attn, v);
  return nn::add(g, fq, nn::linear(g, ctx, m.cross.wo, Tensor()));
}

RefineOutput text_guided_refine(Graph& g, const Model& m, const Tensor& fq, const Tensor& ft,
                                const FusedFeatures& fused, const Tensor& coarse_xy) {
  check_rows(fq, fused.queries, m.config().channels, "text_guided_refine query");
  check_rows(coarse_xy, fused.queries, 2, "text_guided_refine coarse");
  RefineOutput r;
  r.ftq = ft.defined() ? text_attention(g, m, fq, ft) : fq;
  Tensor h = deformable_attention(g, m.refine_attn, m.config(), r.ftq, fused, coarse_xy).out;
  r.offsets = nn::scalar_mul(g, nn::linear(g, h, m.offset_w, m.offset_b), m.config().offset_scale);
  r.refined = nn::add(g, coarse_xy, r.offsets);
  return r;
}

}  // namespace tgpt::track
