#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "anno/annotation.hpp"
#include "metrics/metrics.hpp"
#include "synth/synth.hpp"
#include "tgtrack/train.hpp"

// File-level orchestration shared by the C API and the command-line tool.
namespace tgpt::pipeline {

namespace fs = std::filesystem;

enum class ClipSize { kShort, kLong, kCustom };

inline constexpr int kShortFrames = 8;
inline constexpr int kLongFrames = 24;

struct RunConfig {
  std::string name = "default";
  std::uint64_t seed = 0;
  std::vector<std::pair<anno::Scenario, int>> scenario_counts = {
      {anno::Scenario::kTissueDeformation, 10}, {anno::Scenario::kInstrumentOcclusion, 10},
      {anno::Scenario::kCameraJitter, 10},      {anno::Scenario::kSurfaceReflection, 10},
      {anno::Scenario::kCauterizationSmoke, 10}, {anno::Scenario::kClean, 10}};
  ClipSize clip_size = ClipSize::kLong;
  int n_frames = kLongFrames;  // only read for kCustom
  int n_points = 8;
  double intensity = 0.6;
  int annotation_stride = 3;

  track::ModelConfig model;
  track::LossWeights loss;
  nn::AdamConfig adam;
  int steps = 300;
  track::TextMode train_text_mode = track::TextMode::kGroundTruth;
  track::TextMode text_mode = track::TextMode::kPredicted;  // inference

  int workers = 1;
  std::string clips_dir = "data";
  std::string runs_dir = "runs";

  int frames() const;
  synth::ScenarioConfig scenario_base() const;
  void set_all_counts(int n);
};

std::string_view to_string(ClipSize s);
std::string_view to_string(track::TextMode m);  // "gt", "pred", "none"
track::TextMode parse_text_mode(std::string_view s);  // kInvalidConfig
ClipSize parse_clip_size(std::string_view s);

// Canonical JSON with every field present, in a fixed order.
std::string config_json(const RunConfig& cfg);
// Missing fields keep their defaults; unknown fields are rejected.
RunConfig config_from_json(std::string_view text, RunConfig base = {});
RunConfig load_config(const fs::path& path, RunConfig base = {});

// Seeds and names are re-derived from the config, so the same config always
// yields the same files.
struct GenResult {
  std::vector<fs::path> train, test;
};
GenResult cmd_gen(const RunConfig& cfg, const fs::path& out_dir);

struct FileCheck {
  fs::path path;
  std::vector<std::string> problems;  // "<Category>: detail", empty when valid
};
// Files or directories (searched for clip documents, non-recursively).
std::vector<FileCheck> cmd_validate(const std::vector<fs::path>& paths);

struct LoadedClip {
  fs::path path;
  track::TrainClip clip;
};
// One clip document and its sibling frame stack.
track::TrainClip load_clip(const fs::path& clip_path);
// Clip documents in `dir`, sorted by file name, with their frame stacks.
std::vector<LoadedClip> load_clips(const fs::path& dir, int workers = 1);
// `<dir>/<split>` when it exists, otherwise `dir`.
fs::path split_dir(const fs::path& dir, const std::string& split);

struct TrainResult {
  double first_loss = 0, last_loss = 0;
  std::size_t steps = 0;
};
// Writes config.json, checkpoint.tgpt and loss.csv into run_dir.
TrainResult cmd_train(const RunConfig& cfg, const fs::path& clips_dir, const fs::path& run_dir);

std::string loss_csv(const std::vector<track::StepLog>& log);

// Model from a run directory (its config.json and checkpoint.tgpt).
void load_model(const fs::path& run_dir, RunConfig& cfg, std::unique_ptr<track::Model>& model);

track::TrackPrediction predict(const track::Model& m, const track::TrainClip& clip,
                               track::TextMode mode);

// Writes <run_dir>/preds/<clip_id>.pred.json for every clip; returns the paths.
std::vector<fs::path> cmd_track(const fs::path& run_dir, const fs::path& clips_dir,
                                track::TextMode mode, int workers = 1);

struct EvalResult {
  std::vector<metrics::MetricReport> clip_reports;   // grouped by scenario
  std::vector<metrics::MetricReport> group_reports;  // grouped by point group
  std::vector<metrics::TableRow> scenario_rows, group_rows;
};
// Pairs every clip in gt_dir with <pred_dir>/<clip_id>.pred.json and writes
// report.csv / report.md into out_dir.
EvalResult cmd_eval(const fs::path& gt_dir, const fs::path& pred_dir, const fs::path& out_dir,
                    int workers = 1);

struct AblationRow {
  bool text = false;
  ClipSize size = ClipSize::kLong;
  metrics::TableRow mean;
};
// Text guidance on/off crossed with short/long clips; each cell generates its
// own suite, trains, tracks and evaluates under out_dir. Writes ablation.md.
std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, const fs::path& out_dir);
std::string ablation_markdown(const std::vector<AblationRow>& rows);

// gen -> train -> track -> eval inside <runs_dir>/<name>.
EvalResult cmd_run(const RunConfig& cfg);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view bytes);

}  // namespace tgpt::pipeline
