#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "grad_cases.hpp"

namespace tgpt::testing {

Frame wave_frame(int w, int h, std::uint64_t seed, double dx, double dy) {
  std::mt19937_64 rng(seed);
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 6; ++i) {
    const double ang = uniform(rng, 0, std::numbers::pi);
    const double freq = uniform(rng, 0.05, 0.25);
    waves.push_back({freq * std::cos(ang), freq * std::sin(ang), uniform(rng, 0, 6.3), uniform(rng, 0.3, 1.0)});
  }
  double total = 0;
  for (const Wave& v : waves) total += v.amp;
  Frame f(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (const Wave& v : waves) s += v.amp * std::sin(v.kx * (x - dx) + v.ky * (y - dy) + v.phase);
      f.at(x, y) = std::clamp(0.5 + 0.5 * s / total, 0.0, 1.0);
    }
  }
  return f;
}

track::TrainClip translating_clip(int n_frames, int n_points, int size, std::uint64_t seed,
                                  anno::Vec2 step, anno::PointType type) {
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  track::TrainClip c;
  anno::ClipAnnotation& a = c.annotation;
  a.clip_id = "translating-" + std::to_string(seed);
  a.width = a.height = size;
  a.scenario = anno::Scenario::kClean;
  for (int t = 0; t < n_frames; ++t) {
    a.frame_indices.push_back(t);
    c.frames.push_back(wave_frame(size, size, seed, step.x * t, step.y * t));
  }
  const double margin = 12.0 + std::max(std::abs(step.x), std::abs(step.y)) * n_frames;
  for (int i = 0; i < n_points; ++i) {
    anno::Track tr;
    tr.type = type;
    if (type == anno::PointType::kInstrument) {
      tr.instrument = anno::InstrumentMeta{anno::InstrumentType::kCadiereForceps, i};
    }
    const anno::Vec2 q{anno::quantize(uniform(rng, margin, size - margin)),
                       anno::quantize(uniform(rng, margin, size - margin))};
    for (int t = 0; t < n_frames; ++t) {
      tr.observations.push_back({anno::Vec2{anno::quantize(q.x + step.x * t), anno::quantize(q.y + step.y * t)},
                                 anno::PointStatus::kClearView});
    }
    a.tracks.push_back(std::move(tr));
  }
  return c;
}

void zero_text(track::Model& m) {
  for (nn::Tensor* t : {&m.text.table, &m.text.proj_w, &m.text.proj_b}) {
    for (double& v : t->mutable_values()) v = 0.0;
  }
}

void jitter(nn::Tensor& t, std::mt19937_64& rng, double scale) {
  for (double& v : t.mutable_values()) v += uniform(rng, -scale, scale);
}

std::vector<std::pair<std::string, double>> end_to_end_grad_errors() {
  track::Model m;
  std::mt19937_64 rng(37);
  // Zero-initialised offsets would hide every refinement-branch gradient.
  jitter(m.offset_w, rng, 0.2);
  jitter(m.offset_b, rng, 0.2);
  track::TrainClip clip = translating_clip(2, 2, 64, 38, {2, 1});
  clip.annotation.tracks[1].observations[1].status = anno::PointStatus::kPulled;
  auto loss = [&](nn::Graph& g) { return track::clip_loss(g, m, clip, track::TextMode::kGroundTruth, {}).total; };

  const auto& tensors = m.params().tensors();
  const auto& names = m.params().names();
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    nn::Tensor t = tensors[i];
    const double eps = names[i].starts_with("vision.") ? 1e-6 : 1e-3;
    out.emplace_back(names[i], nn::grad_check_params(loss, std::span(&t, 1), eps, 6, 39 + i)[0]);
  }
  return out;
}

}  // namespace tgpt::testing
