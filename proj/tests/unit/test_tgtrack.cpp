#include <cmath>
#include <random>
#include <type_traits>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "grad_cases.hpp"
#include "numerics/gradcheck.hpp"
#include "numerics/ops.hpp"
#include "tgtrack/model.hpp"
#include "tgtrack/track.hpp"
#include "tgtrack/train.hpp"

using namespace tgpt;
using namespace tgpt::track;
using anno::PointStatus;
using anno::PointType;
using nn::Graph;
using nn::Tensor;

namespace {

// Everything one frame of the pipeline produces up to the fused maps.
struct Stage {
  vision::FeaturePyramid pyr;
  Tensor fq;
  vision::CoarseMatch match;
  FusedFeatures fused;
};

Stage stage(Graph& g, const Model& m, const Frame& f0, const Frame& ft, const std::vector<anno::Vec2>& q) {
  Stage s;
  const auto pyr0 = vision::extract_pyramid(g, f0, m.vision, m.vision_config());
  s.fq = vision::query_features(g, pyr0, q);
  s.pyr = vision::extract_pyramid(g, ft, m.vision, m.vision_config());
  s.match = vision::coarse_match(g, s.fq, s.pyr, m.config().tau);
  s.fused = fuse_multiscale(g, m, s.fq, s.match, s.pyr);
  return s;
}

void fill(Tensor& t, double v) {
  for (double& x : t.mutable_values()) x = v;
}

// Border-clamped bilinear read of channel c from an [H, W, C] value list.
double hand_bilinear(std::span<const double> grid, std::size_t h, std::size_t w, std::size_t cs, double x, double y,
                     std::size_t c) {
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const std::size_t x0 = std::min(static_cast<std::size_t>(x), w - 1), y0 = std::min(static_cast<std::size_t>(y), h - 1);
  const std::size_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
  auto at = [&](std::size_t yy, std::size_t xx) { return grid[(yy * w + xx) * cs + c]; };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

std::vector<anno::Vec2> queries_in(std::size_t n, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<anno::Vec2> q;
  for (std::size_t i = 0; i < n; ++i) q.push_back({tgpt::testing::uniform(rng, 16, size - 16), tgpt::testing::uniform(rng, 16, size - 16)});
  return q;
}

}  // namespace

TEST(EncodeText, DeterministicShapeAndNormalised) {
  Model m;
  Graph g(false);
  const Tensor a = encode_text(g, m, PointType::kTissue, PointStatus::kClearView);
  const Tensor b = encode_text(g, m, PointType::kTissue, PointStatus::kClearView);
  ASSERT_EQ(a.shape(), (nn::Shape{2, 64}));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  for (std::size_t r = 0; r < 2; ++r) {
    double n2 = 0;
    for (std::size_t k = 0; k < 64; ++k) n2 += a[r * 64 + k] * a[r * 64 + k];
    EXPECT_NEAR(std::sqrt(n2), 1.0, 1e-9);
  }
}

TEST(EncodeText, RowsComeFromTypeAndStatusEntries) {
  Model m;
  Graph g(false);
  const Tensor t = encode_text(g, m, PointType::kInstrument, PointStatus::kSelfOcclusion);
  const Tensor& table = m.text.table;
  for (auto [row, sym] : {std::pair{0u, text_row(PointType::kInstrument)}, std::pair{1u, text_row(PointStatus::kSelfOcclusion)}}) {
    double n2 = 0;
    for (std::size_t k = 0; k < 64; ++k) n2 += table[sym * 64 + k] * table[sym * 64 + k];
    for (std::size_t k = 0; k < 64; ++k) EXPECT_NEAR(t[row * 64 + k], table[sym * 64 + k] / std::sqrt(n2), 1e-15);
  }
}

TEST(EncodeText, BatchedMatchesSingle) {
  Model m;
  Graph g(false);
  const std::vector<PointType> types = {PointType::kTissue, PointType::kInstrument};
  const std::vector<PointStatus> st = {PointStatus::kPulled, PointStatus::kExternalOcclusion};
  const Tensor batch = encode_text(g, m, types, st);
  ASSERT_EQ(batch.shape(), (nn::Shape{2, 2, 64}));
  for (std::size_t i = 0; i < 2; ++i) {
    const Tensor one = encode_text(g, m, types[i], st[i]);
    for (std::size_t k = 0; k < 128; ++k) EXPECT_EQ(batch[i * 128 + k], one[k]);
  }
}

TEST(EncodeText, VocabularyMismatch) {
  Model m;
  Graph g(false);
  try {
    encode_text(g, m, PointType::kTissue, PointStatus::kExternalOcclusion);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kVocabularyMismatch);
  }
}

TEST(Fusion, LevelCountAndMatchedCellCorrelationEqualsScore) {
  Model m;
  Graph g(false);
  const Frame f = tgpt::testing::wave_frame(128, 128, 1);
  const auto q = queries_in(3, 128, 2);
  const Stage s = stage(g, m, f, f, q);
  ASSERT_EQ(s.fused.levels.size(), 3u);
  EXPECT_EQ(s.fused.queries, 3u);
  const std::size_t cells = 16 * 16;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(s.fused.levels[0].corr[i * cells + s.match.cell[i]], s.match.score[i]);
  }
  for (std::size_t l = 0; l < 3; ++l) {
    const std::size_t side = 16 >> l;
    EXPECT_EQ(materialize(g, s.fused, l).shape(), (nn::Shape{3, side, side, 32}));
  }
}

TEST(Fusion, FactorisedMapEqualsConcatThenLinear) {
  Model m;
  std::mt19937_64 rng(3);
  tgpt::testing::jitter(m.fuse.b[1], rng, 0.3);
  Graph g(false);
  const Frame f = tgpt::testing::wave_frame(128, 128, 4);
  const auto q = queries_in(2, 128, 5);
  const Stage s = stage(g, m, f, tgpt::testing::wave_frame(128, 128, 4, 3, -2), q);
  for (std::size_t l = 0; l < 3; ++l) {
    const Tensor& grid = s.pyr.levels[l];
    const std::size_t hw = grid.dim(0) * grid.dim(1);
    const Tensor corr = vision::cosine_map(g, s.fq, grid);
    // W = [W_feat | w_corr] applied to [cell ; corr].
    const Tensor w = nn::concat(g, {m.fuse.w_feat[l], nn::reshape(g, m.fuse.w_corr[l], {32, 1})}, 1);
    const Tensor fused = materialize(g, s.fused, l);
    for (std::size_t n = 0; n < 2; ++n) {
      std::vector<double> rows;
      for (std::size_t k = 0; k < hw; ++k) {
        for (std::size_t c = 0; c < 32; ++c) rows.push_back(grid[k * 32 + c]);
        rows.push_back(corr[n * hw + k]);
      }
      const Tensor want = nn::linear(g, Tensor::from({hw, 33}, rows), w, m.fuse.b[l]);
      for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(fused[n * hw * 32 + k], want[k], 1e-12);
    }
  }
}

TEST(Fusion, GradientPassesGradCheck) {
  Model m;
  const Frame f0 = tgpt::testing::wave_frame(64, 64, 6), f1 = tgpt::testing::wave_frame(64, 64, 6, 2, 1);
  const auto q = queries_in(2, 64, 7);
  std::vector<double> readout;
  std::mt19937_64 rng(8);
  for (int i = 0; i < 2 * 8 * 8 * 32; ++i) readout.push_back(tgpt::testing::uniform(rng, -1, 1));
  auto loss = [&](Graph& g) {
    const Stage s = stage(g, m, f0, f1, q);
    Tensor acc = nn::sum(g, nn::mul(g, materialize(g, s.fused, 0), Tensor::from({2, 8, 8, 32}, readout)));
    for (std::size_t l = 1; l < 3; ++l) acc = nn::add(g, acc, nn::sum(g, materialize(g, s.fused, l)));
    return acc;
  };
  std::vector<Tensor> group;
  for (std::size_t l = 0; l < 3; ++l) {
    group.push_back(m.fuse.w_feat[l]);
    group.push_back(m.fuse.w_corr[l]);
    group.push_back(m.fuse.b[l]);
  }
  for (double e : nn::grad_check_params(loss, group, 1e-6, 20, 9)) EXPECT_LE(e, 1e-4);
}

TEST(DeformableAttention, ZeroOffsetsUniformWeightsMatchHandAssembly) {
  Model m;
  DeformParams& p = m.attr_attn;
  for (std::size_t l = 0; l < 3; ++l) {
    fill(p.offset_w[l], 0.0);
    fill(p.offset_b[l], 0.0);
  }
  fill(p.weight_w, 0.0);
  fill(p.weight_b, 0.0);
  std::mt19937_64 rng(10);
  tgpt::testing::jitter(p.out_b, rng, 0.5);

  Graph g(false);
  const Frame f = tgpt::testing::wave_frame(128, 128, 11);
  const std::vector<anno::Vec2> ref = {{37, 61}, {90.5, 20.25}};
  const Stage s = stage(g, m, f, tgpt::testing::wave_frame(128, 128, 11, 1, 1), ref);
  const Tensor ref_xy = Tensor::from({2, 2}, {ref[0].x, ref[0].y, ref[1].x, ref[1].y});
  const DeformOutput out = deformable_attention(g, p, m.config(), s.fq, s.fused, ref_xy);

  const std::size_t c = 32, heads = 2, dh = 16;
  for (std::size_t n = 0; n < 2; ++n) {
    // Mean over levels of the fused map sampled at the reference point.
    std::vector<double> mean(c, 0.0);
    for (std::size_t l = 0; l < 3; ++l) {
      const Tensor map = materialize(g, s.fused, l);
      const std::size_t h = map.dim(1), w = map.dim(2);
      const double stride = s.fused.levels[l].stride;
      const auto vals = map.values().subspan(n * h * w * c, h * w * c);
      for (std::size_t k = 0; k < c; ++k)
        mean[k] += hand_bilinear(vals, h, w, c, ref[n].x / stride - 0.5, ref[n].y / stride - 0.5, k) / 3.0;
    }
    std::vector<double> concat;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      for (std::size_t d = 0; d < dh; ++d) {
        double v = 0;
        for (std::size_t k = 0; k < c; ++k) v += p.value_w[(hd * dh + d) * c + k] * mean[k];
        concat.push_back(v);
      }
    }
    for (std::size_t o = 0; o < c; ++o) {
      double v = p.out_b[o];
      for (std::size_t k = 0; k < c; ++k) v += p.out_w[o * c + k] * concat[k];
      EXPECT_NEAR(out.out[n * c + o], v, 1e-12);
    }
  }
  for (double w : out.weights.values()) EXPECT_NEAR(w, 1.0 / 12.0, 1e-15);
}

TEST(DeformableAttention, WeightsSumToOnePerQueryAndHead) {
  Model m;
  std::mt19937_64 rng(12);
  tgpt::testing::jitter(m.attr_attn.weight_b, rng, 3.0);
  Graph g(false);
  const Frame f = tgpt::testing::wave_frame(128, 128, 13);
  const auto q = queries_in(5, 128, 14);
  const Stage s = stage(g, m, f, f, q);
  const DeformOutput out = deformable_attention(g, m.attr_attn, m.config(), s.fq, s.fused, s.match.xy);
  ASSERT_EQ(out.weights.shape(), (nn::Shape{5, 2, 12}));
  for (std::size_t r = 0; r < 10; ++r) {
    double acc = 0;
    for (std::size_t k = 0; k < 12; ++k) acc += out.weights[r * 12 + k];
    EXPECT_NEAR(acc, 1.0, 1e-12);
  }
  for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(out.locations[l].shape(), (nn::Shape{5, 8, 2}));
}

TEST(DeformableAttention, OffsetGradientPassesGradCheck) {
  Model m;
  // Keep the learned offsets small so samples stay near the initial ring, whose
  // points sit away from cell edges when the reference is on a 32 px lattice.
  for (std::size_t l = 0; l < 3; ++l)
    for (double& v : m.attr_attn.offset_w[l].mutable_values()) v *= 0.02;
  const Frame f0 = tgpt::testing::wave_frame(128, 128, 15), f1 = tgpt::testing::wave_frame(128, 128, 15, 1, 2);
  const std::vector<anno::Vec2> q = {{32, 64}, {96, 32}};
  const Tensor ref = Tensor::from({2, 2}, {32, 64, 96, 32});
  auto loss = [&](Graph& g) {
    const Stage s = stage(g, m, f0, f1, q);
    const DeformOutput out = deformable_attention(g, m.attr_attn, m.config(), s.fq, s.fused, ref);
    return nn::sum(g, nn::mul(g, out.out, out.out));
  };
  std::vector<Tensor> group;
  for (std::size_t l = 0; l < 3; ++l) {
    group.push_back(m.attr_attn.offset_w[l]);
    group.push_back(m.attr_attn.offset_b[l]);
  }
  for (double e : nn::grad_check_params(loss, group, 1e-4, 16, 16)) EXPECT_LE(e, 1e-4);
}

TEST(Attributes, HeadShapesFollowPointType) {
  Model m;
  Graph g(false);
  const Frame f = tgpt::testing::wave_frame(128, 128, 17);
  const auto q = queries_in(3, 128, 18);
  const Stage s = stage(g, m, f, f, q);
  {
    const std::vector<PointType> types(3, PointType::kTissue);
    const auto a = predict_attributes(g, m, s.fq, s.fused, s.match.xy, types);
    EXPECT_EQ(a.type_logits.shape(), (nn::Shape{2, 3}));
    EXPECT_EQ(a.status_logits(PointType::kTissue).shape(), (nn::Shape{7, 3}));
    EXPECT_FALSE(a.instrument_logits.defined());
  }
  {
    const std::vector<PointType> types(3, PointType::kInstrument);
    const auto a = predict_attributes(g, m, s.fq, s.fused, s.match.xy, types);
    EXPECT_EQ(a.status_logits(PointType::kInstrument).shape(), (nn::Shape{4, 3}));
    EXPECT_FALSE(a.tissue_logits.defined());
  }
}

TEST(Attributes, HeadShapeLawOverRandomMixes) {
  Model m;
  std::mt19937_64 rng(19);
  const Frame f = tgpt::testing::wave_frame(64, 64, 20);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    Graph g(false);
    const Stage s = stage(g, m, f, f, queries_in(n, 64, 21 + static_cast<std::uint64_t>(trial)));
    std::vector<PointType> types;
    std::size_t tissue = 0;
    for (std::size_t i = 0; i < n; ++i) {
      types.push_back(rng() % 2 ? PointType::kTissue : PointType::kInstrument);
      tissue += types.back() == PointType::kTissue;
    }
    const auto a = predict_attributes(g, m, s.fq, s.fused, s.match.xy, types);
    EXPECT_EQ(a.type_logits.shape(), (nn::Shape{2, n}));
    if (tissue) {
      EXPECT_EQ(a.tissue_logits.shape(), (nn::Shape{7, tissue}));
    }
    if (tissue < n) {
      EXPECT_EQ(a.instrument_logits.shape(), (nn::Shape{4, n - tissue}));
    }
    const auto st = a.argmax_status(n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_TRUE(anno::status_allowed(types[i], st[i]));
  }
}

TEST(Refine, ZeroOffsetsReturnCoarse) {
  Model m;
  Graph g(false);
  const Frame f = tgpt::testing::wave_frame(128, 128, 22);
  const auto q = queries_in(2, 128, 23);
  const Stage s = stage(g, m, f, f, q);
  const std::vector<PointType> types(2, PointType::kTissue);
  const std::vector<PointStatus> st(2, PointStatus::kClearView);
  const auto r = text_guided_refine(g, m, s.fq, encode_text(g, m, types, st), s.fused, s.match.xy);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(r.refined[k], s.match.xy[k]);
}

TEST(Refine, CoarsePlusOffsetArithmetic) {
  Model m;
  fill(m.offset_w, 0.0);
  m.offset_b.mutable_values()[0] = 2.0 / 8.0;
  m.offset_b.mutable_values()[1] = -3.0 / 8.0;
  Graph g(false);
  const Frame f = tgpt::testing::wave_frame(64, 64, 24);
  const Stage s = stage(g, m, f, f, {{10, 20}});
  const auto r = text_guided_refine(g, m, s.fq, Tensor(), s.fused, Tensor::from({1, 2}, {10, 20}));
  EXPECT_EQ(r.offsets[0], 2.0);
  EXPECT_EQ(r.offsets[1], -3.0);
  EXPECT_EQ(r.refined[0], 12.0);
  EXPECT_EQ(r.refined[1], 17.0);
}

TEST(Refine, RefinedIsExactlyCoarsePlusOffsets) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 5; ++trial) {
    ModelConfig cfg;
    cfg.seed = 100 + static_cast<std::uint64_t>(trial);
    Model m(cfg);
    tgpt::testing::jitter(m.offset_w, rng, 0.5);
    tgpt::testing::jitter(m.offset_b, rng, 0.5);
    const auto clip = tgpt::testing::translating_clip(4, 3, 64, 30 + static_cast<std::uint64_t>(trial), {1.5, -0.5});
    const auto pred = track_clip(m, clip.frames, queries_of(clip.annotation), PredictedText{});
    for (const auto& row : pred.points) {
      for (const auto& p : row) {
        EXPECT_EQ(p.coord.x, p.coarse.x + p.offset.x);
        EXPECT_EQ(p.coord.y, p.coarse.y + p.offset.y);
      }
    }
  }
}

TEST(Refine, ZeroedTextMatchesNoTextPathBitwise) {
  Model m;
  std::mt19937_64 rng(26);
  tgpt::testing::jitter(m.offset_w, rng, 0.3);
  tgpt::testing::zero_text(m);
  Graph g(false);
  const Frame f = tgpt::testing::wave_frame(128, 128, 27);
  const auto q = queries_in(3, 128, 28);
  const Stage s = stage(g, m, f, tgpt::testing::wave_frame(128, 128, 27, 2, 2), q);
  const std::vector<PointType> types(3, PointType::kTissue);
  const std::vector<PointStatus> st = {PointStatus::kClearView, PointStatus::kPulled, PointStatus::kReflection};
  const auto with = text_guided_refine(g, m, s.fq, encode_text(g, m, types, st), s.fused, s.match.xy);
  const auto without = text_guided_refine(g, m, s.fq, Tensor(), s.fused, s.match.xy);
  for (std::size_t k = 0; k < with.ftq.size(); ++k) EXPECT_EQ(with.ftq[k], without.ftq[k]);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(with.refined[k], without.refined[k]);
}

TEST(TrackClip, ZeroTextGroundTruthEqualsNone) {
  Model m;
  std::mt19937_64 rng(29);
  tgpt::testing::jitter(m.offset_w, rng, 0.3);
  tgpt::testing::zero_text(m);
  TrainClip clip = tgpt::testing::translating_clip(5, 4, 128, 31, {2, 1});
  clip.annotation.tracks[2].observations[3] = {std::nullopt, PointStatus::kTissueObscuration};
  const auto qs = queries_of(clip.annotation);
  const auto gt = track_clip(m, clip.frames, qs, guide_for(TextMode::kGroundTruth, clip.annotation, 5));
  const auto none = track_clip(m, clip.frames, qs, NoText{});
  EXPECT_EQ(gt, none);
}

TEST(TrackClip, GroundTruthAndPredictedAgreeWhenStatusHeadIsForced) {
  Model m;
  std::mt19937_64 rng(32);
  tgpt::testing::jitter(m.offset_w, rng, 0.3);
  m.heads.tissue_b.mutable_values()[0] = 50.0;  // argmax is always Clear View
  const auto clip = tgpt::testing::translating_clip(5, 4, 128, 33, {-1, 2});
  const auto qs = queries_of(clip.annotation);
  const auto gt = track_clip(m, clip.frames, qs, guide_for(TextMode::kGroundTruth, clip.annotation, 5));
  const auto pred = track_clip(m, clip.frames, qs, PredictedText{});
  EXPECT_EQ(gt, pred);
  for (const auto& row : pred.points)
    for (const auto& p : row) EXPECT_EQ(p.status, PointStatus::kClearView);
}

TEST(TrackClip, PredictedModeCarriesNoGroundTruth) {
  static_assert(std::is_empty_v<PredictedText>);
  static_assert(std::is_empty_v<NoText>);
}

TEST(TrackClip, FrameZeroIsTheQuery) {
  Model m;
  const auto clip = tgpt::testing::translating_clip(3, 5, 128, 34, {1, 1});
  const auto qs = queries_of(clip.annotation);
  for (const TextGuide& guide : {guide_for(TextMode::kGroundTruth, clip.annotation, 3), TextGuide{PredictedText{}}}) {
    const auto pred = track_clip(m, clip.frames, qs, guide);
    ASSERT_EQ(pred.points.size(), 3u);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      EXPECT_NEAR(pred.points[0][i].coord.x, qs[i].xy.x, 1e-3);
      EXPECT_NEAR(pred.points[0][i].coord.y, qs[i].xy.y, 1e-3);
    }
  }
}

TEST(TrackClip, VisibilityFollowsStatusHead) {
  Model m;
  m.heads.tissue_b.mutable_values()[6] = 50.0;  // Out of View
  const auto clip = tgpt::testing::translating_clip(3, 2, 64, 35, {0, 0});
  const auto qs = queries_of(clip.annotation);
  const auto pred = track_clip(m, clip.frames, qs, PredictedText{});
  for (const auto& row : pred.points)
    for (const auto& p : row) {
      EXPECT_EQ(p.status, PointStatus::kOutOfView);
      EXPECT_FALSE(p.visible);
    }
  // Ground-truth text steers refinement only.
  const auto gt = track_clip(m, clip.frames, qs, guide_for(TextMode::kGroundTruth, clip.annotation, 3));
  for (const auto& row : gt.points)
    for (const auto& p : row) EXPECT_FALSE(p.visible);
}

TEST(TrackClip, EmptyClipRejected) {
  Model m;
  const std::vector<Frame> none;
  const std::vector<Query> q = {{{10, 10}, PointType::kTissue}};
  try {
    track_clip(m, none, q, NoText{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyClip);
  }
}

// ---- loss ----------------------------------------------------------------------

namespace {

// Hand-built forward: one tissue point, refined coords per frame, tissue
// status logits per frame.
ClipForward manual_forward(const std::vector<anno::Vec2>& xy, const std::vector<std::vector<double>>& logits) {
  ClipForward fw;
  fw.types = {PointType::kTissue};
  for (std::size_t t = 0; t < xy.size(); ++t) {
    FrameOutput f;
    f.refined = Tensor::from({1, 2}, {xy[t].x, xy[t].y});
    f.attrs.tissue_rows = {0};
    f.attrs.tissue_logits = Tensor::from({7, 1}, logits[t]);
    fw.frames.push_back(std::move(f));
  }
  return fw;
}

anno::ClipAnnotation one_point_gt(const std::vector<anno::Vec2>& xy) {
  anno::ClipAnnotation a;
  a.clip_id = "loss";
  a.width = a.height = 256;
  anno::Track tr;
  for (std::size_t t = 0; t < xy.size(); ++t) {
    a.frame_indices.push_back(static_cast<int>(t));
    tr.observations.push_back({xy[t], PointStatus::kClearView});
  }
  a.tracks.push_back(tr);
  return a;
}

std::vector<double> saturated(std::size_t cls) {
  std::vector<double> v(7, 0.0);
  v[cls] = 20.0;
  return v;
}

}  // namespace

TEST(Loss, PerfectLinearPredictionIsNearZero) {
  const std::vector<anno::Vec2> xy = {{10, 10}, {12, 11}, {14, 12}, {16, 13}};
  const auto gt = one_point_gt(xy);
  const auto fw = manual_forward(xy, std::vector<std::vector<double>>(4, saturated(0)));
  Graph g(false);
  const LossTerms l = total_loss(g, fw, gt, {});
  EXPECT_LT(l.total.item(), 1e-6);
  EXPECT_EQ(l.point.item(), 0.0);
  EXPECT_EQ(l.smooth.item(), 0.0);
}

TEST(Loss, HalfPixelErrorGivesHuberClosedForm) {
  const std::vector<anno::Vec2> gt_xy = {{10, 10}, {12, 11}};
  const auto gt = one_point_gt(gt_xy);
  const auto fw = manual_forward({{10, 10}, {12.5, 11}}, std::vector<std::vector<double>>(2, saturated(0)));
  Graph g(false);
  const LossTerms l = total_loss(g, fw, gt, {});
  EXPECT_DOUBLE_EQ(l.point.item(), 0.125);
  EXPECT_EQ(l.smooth.item(), 0.0);  // two frames have no interior
}

TEST(Loss, UniformStatusGivesLnSeven) {
  const std::vector<anno::Vec2> xy = {{10, 10}};
  const auto gt = one_point_gt(xy);
  const auto fw = manual_forward(xy, {std::vector<double>(7, 0.0)});
  Graph g(false);
  EXPECT_NEAR(total_loss(g, fw, gt, {}).text.item(), std::log(7.0), 1e-12);
}

TEST(Loss, InvisibleGroundTruthSkipsPointTerm) {
  auto gt = one_point_gt({{10, 10}, {12, 11}});
  gt.tracks[0].observations[1] = {std::nullopt, PointStatus::kOutOfView};
  const auto fw = manual_forward({{10, 10}, {90, 90}}, {saturated(0), saturated(6)});
  Graph g(false);
  EXPECT_EQ(total_loss(g, fw, gt, {}).point.item(), 0.0);
}

TEST(Loss, WeightsScaleTerms) {
  const std::vector<anno::Vec2> xy = {{10, 10}, {12, 11}, {20, 11}};
  const auto gt = one_point_gt(xy);
  const auto fw = manual_forward({{10, 10}, {12, 11}, {20, 11}}, std::vector<std::vector<double>>(3, std::vector<double>(7, 0.0)));
  Graph g(false);
  LossWeights w;
  const LossTerms a = total_loss(g, fw, gt, w);
  w.lambda_smooth = 0.5;
  w.lambda_text = 2.0;
  const LossTerms b = total_loss(g, fw, gt, w);
  EXPECT_DOUBLE_EQ(a.smooth.item(), 7.0);  // |20 - 24 + 10| + |11 - 22 + 10|
  EXPECT_DOUBLE_EQ(b.smooth.item(), 3.5);
  EXPECT_DOUBLE_EQ(b.text.item(), 2.0 * a.text.item());
}

TEST(Loss, DecompositionIsExact) {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 4; ++trial) {
    ModelConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial);
    Model m(cfg);
    tgpt::testing::jitter(m.offset_w, rng, 0.2);
    TrainClip clip = tgpt::testing::translating_clip(4, 3, 64, 40 + static_cast<std::uint64_t>(trial), {1, 1});
    clip.annotation.tracks[1].observations[2] = {std::nullopt, PointStatus::kInstrumentObscuration};
    Graph g(false);
    const LossTerms l = clip_loss(g, m, clip, TextMode::kGroundTruth, {});
    EXPECT_EQ(l.total.item(), (l.point.item() + l.smooth.item()) + l.text.item());
    EXPECT_GT(l.text.item(), 0.0);
  }
}

TEST(Loss, MixedHeadsAverageOverAllPoints) {
  // One tissue and one instrument point with uniform logits: mean CE is
  // (ln 7 + ln 4) / 2.
  ClipForward fw;
  fw.types = {PointType::kTissue, PointType::kInstrument};
  FrameOutput f;
  f.refined = Tensor::from({2, 2}, {5, 5, 6, 6});
  f.attrs.tissue_rows = {0};
  f.attrs.instrument_rows = {1};
  f.attrs.tissue_logits = Tensor::zeros({7, 1});
  f.attrs.instrument_logits = Tensor::zeros({4, 1});
  fw.frames.push_back(std::move(f));
  anno::ClipAnnotation gt;
  gt.width = gt.height = 64;
  gt.frame_indices = {0};
  anno::Track a, b;
  a.observations = {{anno::Vec2{5, 5}, PointStatus::kClearView}};
  b.type = PointType::kInstrument;
  b.instrument = anno::InstrumentMeta{};
  b.observations = {{anno::Vec2{6, 6}, PointStatus::kSelfOcclusion}};
  gt.tracks = {a, b};
  Graph g(false);
  EXPECT_NEAR(total_loss(g, fw, gt, {}).text.item(), 0.5 * (std::log(7.0) + std::log(4.0)), 1e-12);
}

TEST(Loss, MissingFrameIsCoverageGap) {
  const auto gt = one_point_gt({{1, 1}, {2, 2}, {3, 3}});
  const auto fw = manual_forward({{1, 1}, {2, 2}}, std::vector<std::vector<double>>(2, saturated(0)));
  Graph g(false);
  try {
    total_loss(g, fw, gt, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFrameCoverageGap);
  }
}

TEST(Loss, EndToEndGradientPerParameterGroup) {
  for (const auto& [name, err] : tgpt::testing::end_to_end_grad_errors()) EXPECT_LE(err, 1e-3) << name;
}

// ---- training ------------------------------------------------------------------

TEST(Training, ScheduleIsPermutationPerEpoch) {
  const auto s = clip_schedule(5, 23, 7);
  ASSERT_EQ(s.size(), 23u);
  for (std::size_t e = 0; e + 5 <= s.size(); e += 5) {
    std::vector<std::size_t> epoch(s.begin() + static_cast<std::ptrdiff_t>(e), s.begin() + static_cast<std::ptrdiff_t>(e + 5));
    std::sort(epoch.begin(), epoch.end());
    EXPECT_EQ(epoch, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  }
  EXPECT_EQ(s, clip_schedule(5, 23, 7));
  EXPECT_NE(s, clip_schedule(5, 23, 8));
}

TEST(Training, DeterministicAndDescending) {
  std::vector<TrainClip> clips = {tgpt::testing::translating_clip(3, 2, 64, 50, {2, 0}),
                                  tgpt::testing::translating_clip(3, 2, 64, 51, {0, 2})};
  TrainConfig cfg;
  cfg.steps = 12;
  cfg.adam.lr = 3e-3;
  Model a, b;
  const auto la = train(a, clips, cfg);
  const auto lb = train(b, clips, cfg);
  ASSERT_EQ(la.size(), 12u);
  for (std::size_t i = 0; i < la.size(); ++i) EXPECT_EQ(la[i].total, lb[i].total);
  EXPECT_EQ(nn::encode_checkpoint(a.params()), nn::encode_checkpoint(b.params()));
  Model fresh;
  EXPECT_LT(suite_loss(a, clips, TextMode::kGroundTruth, {}), suite_loss(fresh, clips, TextMode::kGroundTruth, {}));
}
