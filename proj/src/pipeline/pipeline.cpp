#include "pipeline/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "numerics/params.hpp"
#include "tgtrack/prediction.hpp"

namespace tgpt::pipeline {

using ordered_json = nlohmann::ordered_json;

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first failure by
// index is rethrown, so the reported error does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const std::size_t w = std::min<std::size_t>(std::max(workers, 1), std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < w; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string number(double v) {
  if (v == 0.0) v = 0.0;
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

bool is_clip_file(const fs::path& p) {
  const std::string name = p.filename().string();
  return name.size() > anno::kClipExtension.size() && name.ends_with(anno::kClipExtension);
}

fs::path frames_path(const fs::path& clip_path) {
  std::string s = clip_path.string();
  s.resize(s.size() - anno::kClipExtension.size());
  return s + ".frames.bin";
}

std::vector<fs::path> clip_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorCode::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_clip_file(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

const metrics::TableRow& mean_row(const std::vector<metrics::TableRow>& rows) {
  for (const auto& r : rows)
    if (r.group == metrics::kMeanRow) return r;
  fail(ErrorCode::kEmptyEval, "no rows to aggregate");
}

}  // namespace

// ---- config -----------------------------------------------------------------

int RunConfig::frames() const {
  switch (clip_size) {
    case ClipSize::kShort: return kShortFrames;
    case ClipSize::kLong: return kLongFrames;
    case ClipSize::kCustom: break;
  }
  return n_frames;
}

synth::ScenarioConfig RunConfig::scenario_base() const {
  synth::ScenarioConfig s;
  s.n_frames = frames();
  s.n_points = n_points;
  s.intensity = intensity;
  s.annotation_stride = annotation_stride;
  return s;
}

void RunConfig::set_all_counts(int n) {
  for (auto& [s, c] : scenario_counts) c = n;
}

std::string_view to_string(ClipSize s) {
  switch (s) {
    case ClipSize::kShort: return "short";
    case ClipSize::kLong: return "long";
    case ClipSize::kCustom: break;
  }
  return "custom";
}

std::string_view to_string(track::TextMode m) {
  switch (m) {
    case track::TextMode::kGroundTruth: return "gt";
    case track::TextMode::kPredicted: return "pred";
    case track::TextMode::kNone: break;
  }
  return "none";
}

track::TextMode parse_text_mode(std::string_view s) {
  if (s == "gt") return track::TextMode::kGroundTruth;
  if (s == "pred") return track::TextMode::kPredicted;
  if (s == "none") return track::TextMode::kNone;
  fail(ErrorCode::kInvalidConfig, "text mode must be gt, pred or none, got '" + std::string(s) + "'");
}

ClipSize parse_clip_size(std::string_view s) {
  if (s == "short") return ClipSize::kShort;
  if (s == "long") return ClipSize::kLong;
  if (s == "custom") return ClipSize::kCustom;
  fail(ErrorCode::kInvalidConfig, "clip size must be short, long or custom, got '" + std::string(s) + "'");
}

std::string config_json(const RunConfig& c) {
  ordered_json j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  ordered_json counts = ordered_json::object();
  for (const auto& [s, n] : c.scenario_counts) counts[std::string(anno::to_string(s))] = n;
  j["scenario_counts"] = counts;
  j["clip_size"] = std::string(to_string(c.clip_size));
  j["n_frames"] = c.frames();
  j["n_points"] = c.n_points;
  j["intensity"] = c.intensity;
  j["annotation_stride"] = c.annotation_stride;
  j["model"] = {{"channels", c.model.channels},     {"text_dim", c.model.text_dim},
                {"heads", c.model.heads},           {"points", c.model.points},
                {"tau", c.model.tau},               {"offset_scale", c.model.offset_scale},
                {"search_radius", c.model.search_radius}};
  j["loss"] = {{"huber_delta", c.loss.huber_delta},
               {"lambda_smooth", c.loss.lambda_smooth},
               {"lambda_text", c.loss.lambda_text}};
  j["optimizer"] = {{"lr", c.adam.lr},
                    {"beta1", c.adam.beta1},
                    {"beta2", c.adam.beta2},
                    {"eps", c.adam.eps},
                    {"steps", c.steps}};
  j["train_text_mode"] = std::string(to_string(c.train_text_mode));
  j["text_mode"] = std::string(to_string(c.text_mode));
  j["workers"] = c.workers;
  j["clips_dir"] = c.clips_dir;
  j["runs_dir"] = c.runs_dir;
  return j.dump(2) + "\n";
}

namespace {

template <class T>
void read_field(const ordered_json& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::kInvalidConfig, where + key + ": wrong type");
  }
}

void reject_unknown(const ordered_json& obj, std::initializer_list<const char*> known,
                    const std::string& where) {
  if (!obj.is_object()) fail(ErrorCode::kInvalidConfig, where + ": expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* s) { return k == s; })) {
      fail(ErrorCode::kInvalidConfig, "unknown config field " + where + k);
    }
  }
}

}  // namespace

RunConfig config_from_json(std::string_view text, RunConfig c) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kInvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j,
                 {"name", "seed", "scenario_counts", "clip_size", "n_frames", "n_points",
                  "intensity", "annotation_stride", "model", "loss", "optimizer",
                  "train_text_mode", "text_mode", "workers", "clips_dir", "runs_dir"},
                 "");
  read_field(j, "name", c.name, "");
  read_field(j, "seed", c.seed, "");
  if (auto it = j.find("scenario_counts"); it != j.end()) {
    if (!it->is_object()) fail(ErrorCode::kInvalidConfig, "scenario_counts: expected an object");
    c.scenario_counts.clear();
    for (const auto& [k, v] : it->items()) {
      auto s = anno::parse_scenario(k);
      if (!s) fail(ErrorCode::kInvalidConfig, "scenario_counts: unknown scenario '" + k + "'");
      if (!v.is_number_integer()) fail(ErrorCode::kInvalidConfig, "scenario_counts." + k + ": expected an integer");
      c.scenario_counts.emplace_back(*s, v.get<int>());
    }
  }
  std::string size, train_mode, mode;
  read_field(j, "clip_size", size, "");
  if (!size.empty()) c.clip_size = parse_clip_size(size);
  read_field(j, "n_frames", c.n_frames, "");
  read_field(j, "n_points", c.n_points, "");
  read_field(j, "intensity", c.intensity, "");
  read_field(j, "annotation_stride", c.annotation_stride, "");
  if (auto it = j.find("model"); it != j.end()) {
    reject_unknown(*it, {"channels", "text_dim", "heads", "points", "tau", "offset_scale", "search_radius"},
                   "model.");
    read_field(*it, "channels", c.model.channels, "model.");
    read_field(*it, "text_dim", c.model.text_dim, "model.");
    read_field(*it, "heads", c.model.heads, "model.");
    read_field(*it, "points", c.model.points, "model.");
    read_field(*it, "tau", c.model.tau, "model.");
    read_field(*it, "offset_scale", c.model.offset_scale, "model.");
    read_field(*it, "search_radius", c.model.search_radius, "model.");
  }
  if (auto it = j.find("loss"); it != j.end()) {
    reject_unknown(*it, {"huber_delta", "lambda_smooth", "lambda_text"}, "loss.");
    read_field(*it, "huber_delta", c.loss.huber_delta, "loss.");
    read_field(*it, "lambda_smooth", c.loss.lambda_smooth, "loss.");
    read_field(*it, "lambda_text", c.loss.lambda_text, "loss.");
  }
  if (auto it = j.find("optimizer"); it != j.end()) {
    reject_unknown(*it, {"lr", "beta1", "beta2", "eps", "steps"}, "optimizer.");
    read_field(*it, "lr", c.adam.lr, "optimizer.");
    read_field(*it, "beta1", c.adam.beta1, "optimizer.");
    read_field(*it, "beta2", c.adam.beta2, "optimizer.");
    read_field(*it, "eps", c.adam.eps, "optimizer.");
    read_field(*it, "steps", c.steps, "optimizer.");
  }
  read_field(j, "train_text_mode", train_mode, "");
  if (!train_mode.empty()) c.train_text_mode = parse_text_mode(train_mode);
  read_field(j, "text_mode", mode, "");
  if (!mode.empty()) c.text_mode = parse_text_mode(mode);
  read_field(j, "workers", c.workers, "");
  read_field(j, "clips_dir", c.clips_dir, "");
  read_field(j, "runs_dir", c.runs_dir, "");
  if (c.steps < 0) fail(ErrorCode::kInvalidConfig, "optimizer.steps must be non-negative");
  if (c.workers < 1) fail(ErrorCode::kInvalidConfig, "workers must be at least 1");
  return c;
}

RunConfig load_config(const fs::path& path, RunConfig base) {
  return config_from_json(read_file(path), std::move(base));
}

// ---- files ------------------------------------------------------------------

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed: " + path.string());
}

fs::path split_dir(const fs::path& dir, const std::string& split) {
  const fs::path sub = dir / split;
  return fs::is_directory(sub) ? sub : dir;
}

track::TrainClip load_clip(const fs::path& clip_path) {
  if (!is_clip_file(clip_path)) fail(ErrorCode::kIo, "not a clip document: " + clip_path.string());
  track::TrainClip c;
  c.annotation = anno::parse_clip(read_file(clip_path));
  c.frames = read_frames(frames_path(clip_path).string());
  const auto& a = c.annotation;
  if (c.frames.empty() || c.frames[0].width != a.width || c.frames[0].height != a.height ||
      static_cast<int>(c.frames.size()) <= a.frame_indices.back()) {
    fail(ErrorCode::kShapeMismatch, clip_path.string() + ": frame stack does not cover the annotation");
  }
  return c;
}

std::vector<LoadedClip> load_clips(const fs::path& dir, int workers) {
  const std::vector<fs::path> files = clip_files(dir);
  std::vector<LoadedClip> out(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i) {
    out[i].path = files[i];
    out[i].clip = load_clip(files[i]);
  });
  return out;
}

// ---- commands -----------------------------------------------------------------

GenResult cmd_gen(const RunConfig& cfg, const fs::path& out_dir) {
  const synth::SuiteSplit split = synth::split_suite(cfg.seed, cfg.scenario_counts, cfg.scenario_base());
  GenResult res;
  for (const char* part : {"train", "test"}) {
    const auto& list = std::string(part) == "train" ? split.train : split.test;
    auto& paths = std::string(part) == "train" ? res.train : res.test;
    const fs::path dir = out_dir / part;
    fs::create_directories(dir);
    paths.resize(list.size());
    parallel_for(list.size(), cfg.workers, [&](std::size_t i) {
      const synth::SynthClip clip = synth::gen_clip(list[i]);
      const fs::path base = dir / clip.annotation.clip_id;
      paths[i] = base.string() + std::string(anno::kClipExtension);
      write_file(paths[i], anno::serialize_clip(clip.annotation));
      write_file(base.string() + ".frames.bin", encode_frames(clip.frames));
    });
  }
  return res;
}

std::vector<FileCheck> cmd_validate(const std::vector<fs::path>& paths) {
  std::vector<fs::path> files;
  for (const fs::path& p : paths) {
    if (fs::is_directory(p)) {
      for (const fs::path& f : clip_files(p)) files.push_back(f);
    } else {
      files.push_back(p);
    }
  }
  std::vector<FileCheck> out;
  for (const fs::path& f : files) {
    FileCheck chk{f, {}};
    try {
      const anno::ClipAnnotation clip = anno::parse_clip_unchecked(read_file(f));
      for (const anno::Violation& v : anno::validate_clip(clip)) {
        chk.problems.push_back("SchemaViolation: " + std::string(anno::to_string(v.code)) +
                               " clip=" + clip.clip_id + " track=" + std::to_string(v.track) +
                               " frame=" + std::to_string(v.frame) + " " + v.detail);
      }
      if (chk.problems.empty() && is_clip_file(f) && fs::exists(frames_path(f))) {
        const auto frames = read_frames(frames_path(f).string());
        if (frames.empty() || frames[0].width != clip.width || frames[0].height != clip.height ||
            static_cast<int>(frames.size()) <= clip.frame_indices.back()) {
          chk.problems.push_back("ShapeMismatch: frame stack does not cover the annotation");
        }
      }
    } catch (const anno::SchemaError& e) {
      chk.problems.push_back("SchemaViolation: " + std::string(anno::to_string(e.violation())) + " " +
                             e.what());
    } catch (const Error& e) {
      chk.problems.push_back(std::string(error_name(e.code())) + ": " + e.what());
    }
    out.push_back(std::move(chk));
  }
  return out;
}

std::string loss_csv(const std::vector<track::StepLog>& log) {
  std::string out = "step,clip_id,total,point,smooth,text\n";
  for (const auto& s : log) {
    out += std::to_string(s.step) + "," + s.clip_id + "," + number(s.total) + "," + number(s.point) +
           "," + number(s.smooth) + "," + number(s.text) + "\n";
  }
  return out;
}

TrainResult cmd_train(const RunConfig& cfg, const fs::path& clips_dir, const fs::path& run_dir) {
  std::vector<LoadedClip> loaded = load_clips(split_dir(clips_dir, "train"), cfg.workers);
  if (loaded.empty()) fail(ErrorCode::kInvalidConfig, "no training clips in " + clips_dir.string());
  std::vector<track::TrainClip> clips;
  for (auto& l : loaded) clips.push_back(std::move(l.clip));

  track::ModelConfig mc = cfg.model;
  mc.seed = cfg.seed;
  track::Model model(mc);
  track::TrainConfig tc;
  tc.steps = cfg.steps;
  tc.adam = cfg.adam;
  tc.weights = cfg.loss;
  tc.text_mode = cfg.train_text_mode;
  tc.seed = cfg.seed;

  fs::create_directories(run_dir);
  write_file(run_dir / "config.json", config_json(cfg));
  const std::vector<track::StepLog> log = track::train(model, clips, tc);
  write_file(run_dir / "checkpoint.tgpt", nn::encode_checkpoint(model.params()));
  write_file(run_dir / "loss.csv", loss_csv(log));

  TrainResult r;
  r.steps = log.size();
  if (!log.empty()) {
    r.first_loss = log.front().total;
    r.last_loss = log.back().total;
  }
  return r;
}

void load_model(const fs::path& run_dir, RunConfig& cfg, std::unique_ptr<track::Model>& model) {
  cfg = load_config(run_dir / "config.json");
  track::ModelConfig mc = cfg.model;
  mc.seed = cfg.seed;
  model = std::make_unique<track::Model>(mc);
  model->params().assign_from(nn::decode_checkpoint(read_file(run_dir / "checkpoint.tgpt")));
}

track::TrackPrediction predict(const track::Model& m, const track::TrainClip& clip,
                               track::TextMode mode) {
  const auto queries = track::queries_of(clip.annotation);
  const auto guide = track::guide_for(mode, clip.annotation, static_cast<int>(clip.frames.size()));
  track::TrackPrediction p = track::track_clip(m, clip.frames, queries, guide);
  p.clip_id = clip.annotation.clip_id;
  return p;
}

std::vector<fs::path> cmd_track(const fs::path& run_dir, const fs::path& clips_dir,
                                track::TextMode mode, int workers) {
  RunConfig cfg;
  std::unique_ptr<track::Model> model;
  load_model(run_dir, cfg, model);
  const std::vector<LoadedClip> clips = load_clips(split_dir(clips_dir, "test"), workers);
  const fs::path out = run_dir / "preds";
  fs::create_directories(out);
  std::vector<fs::path> paths(clips.size());
  parallel_for(clips.size(), workers, [&](std::size_t i) {
    const track::TrackPrediction p = predict(*model, clips[i].clip, mode);
    paths[i] = out / (p.clip_id + ".pred.json");
    write_file(paths[i], track::serialize_prediction(p));
  });
  return paths;
}

EvalResult cmd_eval(const fs::path& gt_dir, const fs::path& pred_dir, const fs::path& out_dir,
                    int workers) {
  const std::vector<fs::path> files = clip_files(split_dir(gt_dir, "test"));
  if (files.empty()) fail(ErrorCode::kEmptyEval, "no clip documents in " + gt_dir.string());
  std::vector<metrics::MetricReport> by_clip(files.size());
  std::vector<std::vector<metrics::MetricReport>> by_group(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i) {
    const anno::ClipAnnotation gt = anno::parse_clip(read_file(files[i]));
    const track::TrackPrediction pred =
        track::parse_prediction(read_file(pred_dir / (gt.clip_id + ".pred.json")));
    const metrics::EvalPair pair(gt, pred);
    by_clip[i] = metrics::evaluate_groups(pair, gt, metrics::Grouping::kScenario).front();
    by_group[i] = metrics::evaluate_groups(pair, gt, metrics::Grouping::kInstrumentType);
  });
  EvalResult r;
  r.clip_reports = std::move(by_clip);
  for (auto& g : by_group)
    for (auto& rep : g) r.group_reports.push_back(std::move(rep));
  r.scenario_rows = metrics::aggregate(r.clip_reports);
  r.group_rows = metrics::aggregate(r.group_reports);
  fs::create_directories(out_dir);
  write_file(out_dir / "report.csv", metrics::report_csv(r.clip_reports));
  write_file(out_dir / "report.md",
             metrics::report_markdown(r.scenario_rows, r.group_rows, r.clip_reports));
  return r;
}

std::string ablation_markdown(const std::vector<AblationRow>& rows) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return std::string(buf);
  };
  std::string out =
      "| Text | Clip Size | AJ | <δ_avg | OA | EPE |\n"
      "|---|---|---|---|---|---|\n";
  for (const AblationRow& r : rows) {
    char epe[32] = "n/a";
    if (r.mean.epe) std::snprintf(epe, sizeof epe, "%.2f", *r.mean.epe);
    out += std::string("| ") + (r.text ? "✓" : "✗") + " | " + std::string(to_string(r.size)) + " | " +
           pct(r.mean.aj) + " | " + pct(r.mean.delta_avg) + " | " + pct(r.mean.oa) + " | " + epe +
           " |\n";
  }
  return out;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, const fs::path& out_dir) {
  std::vector<AblationRow> rows;
  for (bool text : {true, false}) {
    for (ClipSize size : {ClipSize::kShort, ClipSize::kLong}) {
      RunConfig c = cfg;
      c.clip_size = size;
      c.train_text_mode = text ? track::TextMode::kGroundTruth : track::TextMode::kNone;
      c.text_mode = text ? track::TextMode::kPredicted : track::TextMode::kNone;
      c.name = std::string(text ? "text" : "notext") + "-" + std::string(to_string(size));
      const fs::path data = out_dir / (std::string("data-") + std::string(to_string(size)));
      if (!fs::exists(data / "test")) cmd_gen(c, data);
      const fs::path run = out_dir / c.name;
      cmd_train(c, data, run);
      cmd_track(run, data, c.text_mode, c.workers);
      const EvalResult e = cmd_eval(data, run / "preds", run, c.workers);
      rows.push_back({text, size, mean_row(e.scenario_rows)});
    }
  }
  write_file(out_dir / "ablation.md", ablation_markdown(rows));
  return rows;
}

EvalResult cmd_run(const RunConfig& cfg) {
  const fs::path run = fs::path(cfg.runs_dir) / cfg.name;
  const fs::path data = run / "data";
  cmd_gen(cfg, data);
  cmd_train(cfg, data, run);
  cmd_track(run, data, cfg.text_mode, cfg.workers);
  return cmd_eval(data, run / "preds", run, cfg.workers);
}

}  // namespace tgpt::pipeline
