#include "vision/vision.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "numerics/ops.hpp"

namespace tgpt::vision {

using nn::Graph;
using nn::Tensor;

namespace {
// Added to the logits of cells outside the search window; exp() underflows to 0.
constexpr double kMasked = -1e300;
}  // namespace

VisionParams VisionParams::create(nn::ParameterSet& params, const VisionConfig& cfg,
                                  std::mt19937_64& rng) {
  const std::size_t c = cfg.channels, pp = cfg.patch * cfg.patch;
  VisionParams v;
  v.embed_w = params.add_uniform("vision.embed.w", {c, pp}, pp, rng);
  // Rows start orthogonal to the constant patch so that initial features
  // respond to texture rather than to brightness.
  auto w = v.embed_w.mutable_values();
  for (std::size_t r = 0; r < c; ++r) {
    double mean = 0.0;
    for (std::size_t k = 0; k < pp; ++k) mean += w[r * pp + k];
    mean /= static_cast<double>(pp);
    for (std::size_t k = 0; k < pp; ++k) w[r * pp + k] -= mean;
  }
  v.embed_b = params.add_zeros("vision.embed.b", {c});
  v.mix_w = params.add_uniform("vision.mix.w", {c, c}, c, rng);
  v.mix_b = params.add_zeros("vision.mix.b", {c});
  for (std::size_t l = 0; l < 2; ++l) {
    const std::string base = "vision.level" + std::to_string(l + 1);
    v.level_w[l] = params.add_uniform(base + ".w", {c, c}, c, rng);
    v.level_b[l] = params.add_zeros(base + ".b", {c});
  }
  return v;
}

Tensor patch_matrix(const Frame& frame, std::size_t patch) {
  const std::size_t gw = frame.width / patch, gh = frame.height / patch;
  std::vector<double> m(gw * gh * patch * patch);
  std::size_t k = 0;
  for (std::size_t gy = 0; gy < gh; ++gy)
    for (std::size_t gx = 0; gx < gw; ++gx)
      for (std::size_t dy = 0; dy < patch; ++dy)
        for (std::size_t dx = 0; dx < patch; ++dx) {
          m[k++] = frame.at(static_cast<int>(gx * patch + dx), static_cast<int>(gy * patch + dy)) - 0.5;
        }
  return Tensor::from({gh * gw, patch * patch}, std::move(m));
}

FeaturePyramid extract_pyramid(Graph& g, const Frame& frame, const VisionParams& p,
                               const VisionConfig& cfg) {
  const std::size_t align = cfg.patch << (kLevels - 1);
  if (frame.width <= 0 || frame.height <= 0 || frame.width % align || frame.height % align ||
      frame.pixels.size() != static_cast<std::size_t>(frame.width) * frame.height) {
    fail(ErrorCode::kBadFrameShape, "frame " + std::to_string(frame.width) + "x" +
                                        std::to_string(frame.height) + " is not divisible by " +
                                        std::to_string(align));
  }
  const std::size_t gw = frame.width / cfg.patch, gh = frame.height / cfg.patch;
  Tensor x = nn::linear(g, patch_matrix(frame, cfg.patch), p.embed_w, p.embed_b);
  x = nn::layer_norm(g, x, 1);
  x = nn::relu(g, nn::linear(g, x, p.mix_w, p.mix_b));

  FeaturePyramid pyr;
  pyr.frame_width = frame.width;
  pyr.frame_height = frame.height;
  pyr.patch = cfg.patch;
  pyr.levels[0] = nn::reshape(g, x, {gh, gw, cfg.channels});
  for (std::size_t l = 1; l < kLevels; ++l) {
    Tensor pooled = nn::avg_pool2x2(g, pyr.levels[l - 1]);
    pyr.levels[l] = nn::linear(g, pooled, p.level_w[l - 1], p.level_b[l - 1]);
  }
  return pyr;
}

Tensor query_features(Graph& g, const FeaturePyramid& pyr0, std::span<const anno::Vec2> queries) {
  if (queries.empty()) fail(ErrorCode::kOutOfBounds, "no query points");
  std::vector<double> xy;
  xy.reserve(queries.size() * 2);
  for (const anno::Vec2& q : queries) {
    if (!(q.x >= 0 && q.x < pyr0.frame_width && q.y >= 0 && q.y < pyr0.frame_height)) {
      fail(ErrorCode::kOutOfBounds, "query (" + std::to_string(q.x) + ", " + std::to_string(q.y) +
                                        ") outside the frame");
    }
    xy.push_back(to_grid(q.x, pyr0.stride(0)));
    xy.push_back(to_grid(q.y, pyr0.stride(0)));
  }
  return nn::bilinear_sample(g, pyr0.levels[0], Tensor::from({queries.size(), 2}, std::move(xy)));
}

Tensor cosine_map(Graph& g, const Tensor& fq, const Tensor& level) {
  const std::size_t c = level.shape().back();
  Tensor cells = nn::reshape(g, level, {level.size() / c, c});
  Tensor a = nn::l2_normalize(g, fq);
  Tensor b = nn::l2_normalize(g, cells);
  return nn::matmul(g, a, nn::transpose(g, b));
}

CoarseMatch coarse_match(Graph& g, const Tensor& fq, const FeaturePyramid& pyr, double tau,
                         const SearchWindow* window) {
  const Tensor& level = pyr.levels[0];
  const std::size_t gh = level.dim(0), gw = level.dim(1), c = level.dim(2);
  if (fq.rank() != 2 || fq.dim(1) != c) {
    fail(ErrorCode::kShapeMismatch, "coarse_match: query features " + nn::shape_str(fq.shape()) +
                                        " vs level " + nn::shape_str(level.shape()));
  }
  const std::size_t n = fq.dim(0), cells = gh * gw;
  const double stride = pyr.stride(0);
  if (window && window->centres.size() != n) {
    fail(ErrorCode::kShapeMismatch, "coarse_match: " + std::to_string(window->centres.size()) +
                                        " window centres for " + std::to_string(n) + " queries");
  }

  CoarseMatch m;
  m.corr = cosine_map(g, fq, level);
  std::vector<double> centres(cells * 2);
  for (std::size_t k = 0; k < cells; ++k) {
    centres[2 * k] = (static_cast<double>(k % gw) + 0.5) * stride;
    centres[2 * k + 1] = (static_cast<double>(k / gw) + 0.5) * stride;
  }
  // Candidate cell range per query, as inclusive [lo, hi] column and row bounds.
  auto range = [&](double centre, double limit, std::size_t count, std::size_t& lo, std::size_t& hi) {
    const double ctr = std::clamp(centre, 0.0, limit);
    const double r = std::max(window->radius, stride / 2);
    lo = static_cast<std::size_t>(std::max(0.0, std::ceil((ctr - r) / stride - 0.5)));
    hi = static_cast<std::size_t>(std::clamp(std::floor((ctr + r) / stride - 0.5), 0.0,
                                             static_cast<double>(count - 1)));
    lo = std::min(lo, hi);
  };

  std::vector<double> hard(n * 2);
  std::vector<double> mask;
  if (window) mask.assign(n * cells, kMasked);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t x0 = 0, x1 = gw - 1, y0 = 0, y1 = gh - 1;
    if (window) {
      range(window->centres[i].x, pyr.frame_width, gw, x0, x1);
      range(window->centres[i].y, pyr.frame_height, gh, y0, y1);
    }
    const double* row = m.corr.values().data() + i * cells;
    std::size_t best = y0 * gw + x0;
    for (std::size_t y = y0; y <= y1; ++y)
      for (std::size_t x = x0; x <= x1; ++x) {
        const std::size_t k = y * gw + x;
        if (window) mask[i * cells + k] = 0.0;
        if (row[k] > row[best]) best = k;
      }
    m.cell.push_back(best);
    m.score.push_back(row[best]);
    hard[2 * i] = centres[2 * best];
    hard[2 * i + 1] = centres[2 * best + 1];
  }
  m.xy = Tensor::from({n, 2}, std::move(hard));
  Tensor logits = nn::scalar_mul(g, m.corr, 1.0 / tau);
  if (window) logits = nn::add(g, logits, Tensor::from({n, cells}, std::move(mask)));
  Tensor weights = nn::softmax(g, logits, 1);
  m.soft_xy = nn::matmul(g, weights, Tensor::from({cells, 2}, std::move(centres)));
  m.feat = nn::gather_rows(g, nn::reshape(g, level, {cells, c}), m.cell);
  return m;
}

}  // namespace tgpt::vision
