#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "anno/annotation.hpp"
#include "common/frame.hpp"

namespace tgpt::synth {

struct ScenarioConfig {
  anno::Scenario scenario = anno::Scenario::kClean;
  std::uint64_t seed = 0;
  int n_frames = 24;
  int n_points = 8;
  int width = 256;
  int height = 256;
  double intensity = 0.6;   // challenge severity in [0, 1]
  int annotation_stride = 3;  // every k-th frame annotated, plus the last

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct Rect {
  double x0, y0, x1, y1;
  bool contains(anno::Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
};

struct Ellipse {
  double cx, cy, ax, ay;
  // <= 1 inside
  double level(anno::Vec2 p) const {
    const double dx = (p.x - cx) / ax, dy = (p.y - cy) / ay;
    return dx * dx + dy * dy;
  }
};

struct SmokeBlob {
  double cx, cy, sigma, peak;
  double density(anno::Vec2 p) const;
};

// Per-frame occluder and perturbation geometry, exposed so that labels can be
// re-derived independently of the generator.
struct ScenarioGeometry {
  std::vector<std::optional<Rect>> instrument;       // InstrumentOcclusion
  std::vector<std::vector<Ellipse>> reflections;     // SurfaceReflection
  std::vector<std::optional<SmokeBlob>> smoke;       // CauterizationSmoke
  std::vector<anno::Vec2> jitter;                    // CameraJitter
  double pull_speed = 0.0;                           // TissueDeformation
};

// Status thresholds shared by the generator and its checkers.
inline constexpr double kSmokeVisibleDensity = 0.6;
inline constexpr double kSmokeHiddenDensity = 0.9;

struct SynthClip {
  std::vector<Frame> frames;
  anno::ClipAnnotation annotation;
  // dense_truth[frame][point]: exact position, including while occluded.
  std::vector<std::vector<anno::Vec2>> dense_truth;
  // Status at every frame (the annotation keeps only annotated frames).
  std::vector<std::vector<anno::PointStatus>> dense_status;
  ScenarioGeometry geometry;
};

void validate_config(const ScenarioConfig& cfg);  // throws kInvalidConfig

// Deterministic: equal configs give bit-identical clips.
SynthClip gen_clip(const ScenarioConfig& cfg);

// Largest per-frame displacement any point may show for this config.
double max_step(const ScenarioConfig& cfg);

std::vector<int> annotated_frames(int n_frames, int stride);

std::string clip_id_for(const ScenarioConfig& cfg);

struct SuiteSplit {
  std::vector<ScenarioConfig> train;
  std::vector<ScenarioConfig> test;
};

// Per-scenario 4:1 split. Clip seeds and membership are keyed on
// (seed, scenario, index), so the order of `counts` does not matter. `base`
// supplies everything except scenario and seed.
SuiteSplit split_suite(std::uint64_t seed,
                       const std::vector<std::pair<anno::Scenario, int>>& counts,
                       const ScenarioConfig& base = {});

}  // namespace tgpt::synth
