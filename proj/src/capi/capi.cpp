#include "tgpt/tgpt.h"

#include <cstring>
#include <filesystem>
#include <memory>
#include <new>
#include <string>

#include "pipeline/pipeline.hpp"
#include "tgtrack/prediction.hpp"

namespace pl = tgpt::pipeline;

struct tgpt_config {
  pl::RunConfig cfg;
};

struct tgpt_clip {
  tgpt::track::TrainClip clip;
};

struct tgpt_model {
  pl::RunConfig cfg;
  std::unique_ptr<tgpt::track::Model> model;
};

struct tgpt_prediction {
  tgpt::track::TrackPrediction pred;
};

namespace {

thread_local std::string g_last_error;

static_assert(static_cast<int>(tgpt::ErrorCode::kInvalidArgument) == TGPT_INVALID_ARGUMENT,
              "status codes must mirror ErrorCode");

tgpt_status fail_with(tgpt_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs `fn`, translating exceptions into status codes.
template <class Fn>
tgpt_status guard(Fn fn) {
  try {
    g_last_error.clear();
    fn();
    return TGPT_OK;
  } catch (const tgpt::Error& e) {
    return fail_with(static_cast<tgpt_status>(e.code()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail_with(TGPT_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail_with(TGPT_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail_with(TGPT_INTERNAL, e.what());
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) tgpt::fail(tgpt::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

tgpt::track::TextMode mode_of(tgpt_text_mode m) {
  switch (m) {
    case TGPT_TEXT_GT: return tgpt::track::TextMode::kGroundTruth;
    case TGPT_TEXT_PRED: return tgpt::track::TextMode::kPredicted;
    case TGPT_TEXT_NONE: return tgpt::track::TextMode::kNone;
  }
  tgpt::fail(tgpt::ErrorCode::kInvalidArgument, "unknown text mode " + std::to_string(m));
}

}  // namespace

extern "C" {

const char* tgpt_status_name(tgpt_status status) {
  if (status == TGPT_INTERNAL) return "Internal";
  if (status < TGPT_OK || status > TGPT_INTERNAL) return "Unknown";
  return tgpt::error_name(static_cast<tgpt::ErrorCode>(status)).data();
}

const char* tgpt_last_error(void) { return g_last_error.c_str(); }

void tgpt_string_free(char* s) { std::free(s); }

// ---- config -------------------------------------------------------------------

tgpt_status tgpt_config_new(tgpt_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new tgpt_config{};
  });
}

tgpt_status tgpt_config_from_json(const char* json, tgpt_config** out) {
  return guard([&] {
    require(json, "json");
    require(out, "out");
    auto c = std::make_unique<tgpt_config>();
    c->cfg = pl::config_from_json(json);
    *out = c.release();
  });
}

tgpt_status tgpt_config_load(const char* path, tgpt_config** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    auto c = std::make_unique<tgpt_config>();
    c->cfg = pl::load_config(path);
    *out = c.release();
  });
}

tgpt_status tgpt_config_merge_json(tgpt_config* cfg, const char* json) {
  return guard([&] {
    require(cfg, "cfg");
    require(json, "json");
    cfg->cfg = pl::config_from_json(json, cfg->cfg);
  });
}

tgpt_status tgpt_config_to_json(const tgpt_config* cfg, char** out) {
  return guard([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup(pl::config_json(cfg->cfg));
  });
}

void tgpt_config_free(tgpt_config* cfg) { delete cfg; }

tgpt_status tgpt_config_set_seed(tgpt_config* cfg, uint64_t seed) {
  return guard([&] {
    require(cfg, "cfg");
    cfg->cfg.seed = seed;
  });
}

tgpt_status tgpt_config_set_steps(tgpt_config* cfg, int steps) {
  return guard([&] {
    require(cfg, "cfg");
    if (steps < 0) tgpt::fail(tgpt::ErrorCode::kInvalidConfig, "steps must be non-negative");
    cfg->cfg.steps = steps;
  });
}

tgpt_status tgpt_config_set_workers(tgpt_config* cfg, int workers) {
  return guard([&] {
    require(cfg, "cfg");
    if (workers < 1) tgpt::fail(tgpt::ErrorCode::kInvalidConfig, "workers must be at least 1");
    cfg->cfg.workers = workers;
  });
}

tgpt_status tgpt_config_set_clip_size(tgpt_config* cfg, tgpt_clip_size size) {
  return guard([&] {
    require(cfg, "cfg");
    if (size == TGPT_CLIP_SHORT) {
      cfg->cfg.clip_size = pl::ClipSize::kShort;
    } else if (size == TGPT_CLIP_LONG) {
      cfg->cfg.clip_size = pl::ClipSize::kLong;
    } else {
      tgpt::fail(tgpt::ErrorCode::kInvalidArgument, "unknown clip size");
    }
  });
}

tgpt_status tgpt_config_set_text_mode(tgpt_config* cfg, tgpt_text_mode mode) {
  return guard([&] {
    require(cfg, "cfg");
    cfg->cfg.text_mode = mode_of(mode);
  });
}

tgpt_status tgpt_config_set_train_text_mode(tgpt_config* cfg, tgpt_text_mode mode) {
  return guard([&] {
    require(cfg, "cfg");
    cfg->cfg.train_text_mode = mode_of(mode);
  });
}

tgpt_status tgpt_config_set_clips_per_scenario(tgpt_config* cfg, int count) {
  return guard([&] {
    require(cfg, "cfg");
    if (count < 0) tgpt::fail(tgpt::ErrorCode::kInvalidConfig, "clip count must be non-negative");
    cfg->cfg.set_all_counts(count);
  });
}

tgpt_status tgpt_config_set_name(tgpt_config* cfg, const char* name) {
  return guard([&] {
    require(cfg, "cfg");
    require(name, "name");
    if (*name == '\0') tgpt::fail(tgpt::ErrorCode::kInvalidConfig, "run name is empty");
    cfg->cfg.name = name;
  });
}

tgpt_status tgpt_config_set_runs_dir(tgpt_config* cfg, const char* dir) {
  return guard([&] {
    require(cfg, "cfg");
    require(dir, "dir");
    cfg->cfg.runs_dir = dir;
  });
}

// ---- commands -------------------------------------------------------------------

tgpt_status tgpt_gen(const tgpt_config* cfg, const char* out_dir, size_t* n_train, size_t* n_test) {
  return guard([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    const pl::GenResult r = pl::cmd_gen(cfg->cfg, out_dir);
    if (n_train) *n_train = r.train.size();
    if (n_test) *n_test = r.test.size();
  });
}

tgpt_status tgpt_validate(const char* path, size_t* n_files, size_t* n_invalid, char** report) {
  return guard([&] {
    require(path, "path");
    const auto checks = pl::cmd_validate({path});
    std::string text;
    std::size_t bad = 0;
    for (const auto& c : checks) {
      if (!c.problems.empty()) ++bad;
      for (const auto& p : c.problems) text += c.path.string() + ": " + p + "\n";
    }
    if (n_files) *n_files = checks.size();
    if (n_invalid) *n_invalid = bad;
    if (report) *report = dup(text);
  });
}

tgpt_status tgpt_train(const tgpt_config* cfg, const char* clips_dir, const char* run_dir,
                       double* first_loss, double* last_loss) {
  return guard([&] {
    require(cfg, "cfg");
    require(clips_dir, "clips_dir");
    require(run_dir, "run_dir");
    const pl::TrainResult r = pl::cmd_train(cfg->cfg, clips_dir, run_dir);
    if (first_loss) *first_loss = r.first_loss;
    if (last_loss) *last_loss = r.last_loss;
  });
}

tgpt_status tgpt_track(const char* run_dir, const char* clips_dir, tgpt_text_mode mode, int workers,
                       size_t* n_written) {
  return guard([&] {
    require(run_dir, "run_dir");
    require(clips_dir, "clips_dir");
    const auto paths = pl::cmd_track(run_dir, clips_dir, mode_of(mode), workers);
    if (n_written) *n_written = paths.size();
  });
}

tgpt_status tgpt_eval(const char* gt_dir, const char* pred_dir, const char* out_dir, int workers,
                      double* mean_aj, double* mean_delta_avg, double* mean_oa) {
  return guard([&] {
    require(gt_dir, "gt_dir");
    require(pred_dir, "pred_dir");
    require(out_dir, "out_dir");
    const pl::EvalResult r = pl::cmd_eval(gt_dir, pred_dir, out_dir, workers);
    for (const auto& row : r.scenario_rows) {
      if (row.group != tgpt::metrics::kMeanRow) continue;
      if (mean_aj) *mean_aj = row.aj;
      if (mean_delta_avg) *mean_delta_avg = row.delta_avg;
      if (mean_oa) *mean_oa = row.oa;
    }
  });
}

tgpt_status tgpt_ablate(const tgpt_config* cfg, const char* out_dir, char** markdown) {
  return guard([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    const auto rows = pl::cmd_ablate(cfg->cfg, out_dir);
    if (markdown) *markdown = dup(pl::ablation_markdown(rows));
  });
}

tgpt_status tgpt_run(const tgpt_config* cfg) {
  return guard([&] {
    require(cfg, "cfg");
    pl::cmd_run(cfg->cfg);
  });
}

// ---- in-memory ------------------------------------------------------------------

tgpt_status tgpt_clip_load(const char* clip_path, tgpt_clip** out) {
  return guard([&] {
    require(clip_path, "clip_path");
    require(out, "out");
    *out = new tgpt_clip{pl::load_clip(clip_path)};
  });
}

size_t tgpt_clip_frame_count(const tgpt_clip* clip) { return clip ? clip->clip.frames.size() : 0; }

size_t tgpt_clip_track_count(const tgpt_clip* clip) {
  return clip ? clip->clip.annotation.tracks.size() : 0;
}

void tgpt_clip_free(tgpt_clip* clip) { delete clip; }

tgpt_status tgpt_model_load(const char* run_dir, tgpt_model** out) {
  return guard([&] {
    require(run_dir, "run_dir");
    require(out, "out");
    auto m = std::make_unique<tgpt_model>();
    pl::load_model(run_dir, m->cfg, m->model);
    *out = m.release();
  });
}

void tgpt_model_free(tgpt_model* model) { delete model; }

tgpt_status tgpt_track_clip(const tgpt_model* model, const tgpt_clip* clip, tgpt_text_mode mode,
                            tgpt_prediction** out) {
  return guard([&] {
    require(model, "model");
    require(clip, "clip");
    require(out, "out");
    *out = new tgpt_prediction{pl::predict(*model->model, clip->clip, mode_of(mode))};
  });
}

tgpt_status tgpt_prediction_coord(const tgpt_prediction* pred, size_t frame, size_t track, double* x,
                                  double* y, int* visible) {
  return guard([&] {
    require(pred, "pred");
    const auto& pts = pred->pred.points;
    if (frame >= pts.size() || track >= pts[frame].size()) {
      tgpt::fail(tgpt::ErrorCode::kIndexOutOfRange, "frame/track outside the prediction");
    }
    const auto& p = pts[frame][track];
    if (x) *x = p.coord.x;
    if (y) *y = p.coord.y;
    if (visible) *visible = p.visible ? 1 : 0;
  });
}

tgpt_status tgpt_prediction_to_json(const tgpt_prediction* pred, char** out) {
  return guard([&] {
    require(pred, "pred");
    require(out, "out");
    *out = dup(tgpt::track::serialize_prediction(pred->pred));
  });
}

void tgpt_prediction_free(tgpt_prediction* pred) { delete pred; }

}  // extern "C"
