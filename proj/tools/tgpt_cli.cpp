#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tgpt/tgpt.h"

namespace {

// One line on stderr, "error: <Category>: <message>", then a nonzero exit.
int report(tgpt_status s) {
  std::string msg = tgpt_last_error();
  for (char& c : msg)
    if (c == '\n' || c == '\r') c = ' ';
  std::fprintf(stderr, "error: %s: %s\n", tgpt_status_name(s), msg.c_str());
  return 1;
}

struct Check {
  tgpt_status status = TGPT_OK;
  bool operator()(tgpt_status s) {
    status = s;
    return s == TGPT_OK;
  }
};

struct Options {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string clips;
  std::string text_mode;
  std::string clip_size;
  std::optional<int> steps;
  std::optional<int> workers;
  std::optional<int> per_scenario;
  std::string out;
  std::string name;
  std::string preds;
};

tgpt_text_mode text_mode_of(const std::string& s) {
  if (s == "gt") return TGPT_TEXT_GT;
  if (s == "none") return TGPT_TEXT_NONE;
  return TGPT_TEXT_PRED;
}

enum class ModeTarget { kTrain, kInfer, kRun };

// defaults <- --config <- flags <- TGPT_SEED
tgpt_status resolve(const Options& o, ModeTarget target, tgpt_config** out) {
  tgpt_status s = o.config.empty() ? tgpt_config_new(out) : tgpt_config_load(o.config.c_str(), out);
  if (s != TGPT_OK) return s;
  tgpt_config* c = *out;
  if (o.seed && (s = tgpt_config_set_seed(c, *o.seed)) != TGPT_OK) return s;
  if (const char* env = std::getenv("TGPT_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*env == '\0' || *end != '\0') {
      std::fprintf(stderr, "error: InvalidConfig: TGPT_SEED is not an unsigned integer\n");
      std::exit(1);
    }
    if ((s = tgpt_config_set_seed(c, v)) != TGPT_OK) return s;
  }
  if (o.steps && (s = tgpt_config_set_steps(c, *o.steps)) != TGPT_OK) return s;
  if (o.workers && (s = tgpt_config_set_workers(c, *o.workers)) != TGPT_OK) return s;
  if (o.per_scenario && (s = tgpt_config_set_clips_per_scenario(c, *o.per_scenario)) != TGPT_OK) return s;
  if (!o.name.empty() && (s = tgpt_config_set_name(c, o.name.c_str())) != TGPT_OK) return s;
  if (!o.clip_size.empty()) {
    s = tgpt_config_set_clip_size(c, o.clip_size == "short" ? TGPT_CLIP_SHORT : TGPT_CLIP_LONG);
    if (s != TGPT_OK) return s;
  }
  if (!o.text_mode.empty()) {
    const tgpt_text_mode m = text_mode_of(o.text_mode);
    if (target == ModeTarget::kTrain) {
      s = tgpt_config_set_train_text_mode(c, m);
    } else {
      s = tgpt_config_set_text_mode(c, m);
      // A run without text at inference is also trained without it.
      if (s == TGPT_OK && target == ModeTarget::kRun && m == TGPT_TEXT_NONE) {
        s = tgpt_config_set_train_text_mode(c, m);
      }
    }
    if (s != TGPT_OK) return s;
  }
  return TGPT_OK;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--seed", o.seed, "Random seed (TGPT_SEED overrides)");
  cmd->add_option("--config", o.config, "Run config JSON")->check(CLI::ExistingFile);
  cmd->add_option("--workers", o.workers, "Clip-parallel workers")->check(CLI::PositiveNumber);
}

void add_text_mode(CLI::App* cmd, Options& o) {
  cmd->add_option("--text-mode", o.text_mode, "Text guidance: gt, pred or none")
      ->check(CLI::IsMember({"gt", "pred", "none"}));
}

void add_clip_size(CLI::App* cmd, Options& o) {
  cmd->add_option("--clip-size", o.clip_size, "short (8 frames) or long (24 frames)")
      ->check(CLI::IsMember({"short", "long"}));
}

void add_counts(CLI::App* cmd, Options& o) {
  cmd->add_option("--per-scenario", o.per_scenario, "Clips generated per scenario")
      ->check(CLI::NonNegativeNumber);
}

std::string or_default(const std::string& v, const char* d) { return v.empty() ? d : v; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-guided point tracking on synthetic surgical clips"};
  app.require_subcommand(1);
  Options o;
  std::vector<std::string> paths;

  auto* gen = app.add_subcommand("gen", "Generate a seeded synthetic clip suite");
  add_common(gen, o);
  add_clip_size(gen, o);
  add_counts(gen, o);
  gen->add_option("--out", o.out, "Output directory (default: data)");

  auto* validate = app.add_subcommand("validate", "Check clip documents against the schema");
  validate->add_option("paths", paths, "Clip files or directories");
  validate->add_option("--clips", o.clips, "Clip directory");

  auto* train = app.add_subcommand("train", "Train a model and write a run directory");
  add_common(train, o);
  add_text_mode(train, o);
  train->add_option("--clips", o.clips, "Clip directory (default: data)");
  train->add_option("--steps", o.steps, "Adam steps")->check(CLI::NonNegativeNumber);
  train->add_option("--out", o.out, "Run directory (default: runs/<name>)");
  train->add_option("--name", o.name, "Run name");

  auto* trk = app.add_subcommand("track", "Track test clips with a trained run");
  add_text_mode(trk, o);
  trk->add_option("--clips", o.clips, "Clip directory (default: data)");
  trk->add_option("--out", o.out, "Run directory")->required();
  trk->add_option("--workers", o.workers, "Clip-parallel workers")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Score predictions and write report.csv / report.md");
  eval->add_option("--clips", o.clips, "Ground-truth clip directory (default: data)");
  eval->add_option("--preds", o.preds, "Prediction directory (default: <out>/preds)");
  eval->add_option("--out", o.out, "Report directory")->required();
  eval->add_option("--workers", o.workers, "Clip-parallel workers")->check(CLI::PositiveNumber);

  auto* ablate = app.add_subcommand("ablate", "Text guidance x clip size matrix");
  add_common(ablate, o);
  add_counts(ablate, o);
  ablate->add_option("--steps", o.steps, "Adam steps per cell")->check(CLI::NonNegativeNumber);
  ablate->add_option("--out", o.out, "Output directory (default: runs/ablate)");

  auto* run = app.add_subcommand("run", "gen, train, track and eval in runs/<name>");
  add_common(run, o);
  add_text_mode(run, o);
  add_clip_size(run, o);
  add_counts(run, o);
  run->add_option("--steps", o.steps, "Adam steps")->check(CLI::NonNegativeNumber);
  run->add_option("--name", o.name, "Run name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::fprintf(stderr, "error: InvalidArgument: %s\n", msg.c_str());
    return 2;
  }

  Check ok;
  tgpt_config* cfg = nullptr;
  int rc = 0;

  if (gen->parsed()) {
    size_t n_train = 0, n_test = 0;
    const std::string out = or_default(o.out, "data");
    if (!ok(resolve(o, ModeTarget::kInfer, &cfg)) || !ok(tgpt_gen(cfg, out.c_str(), &n_train, &n_test))) {
      rc = report(ok.status);
    } else {
      std::printf("wrote %zu train and %zu test clips to %s\n", n_train, n_test, out.c_str());
    }
  } else if (validate->parsed()) {
    if (!o.clips.empty()) paths.push_back(o.clips);
    if (paths.empty()) paths.push_back("data");
    size_t files = 0, invalid = 0;
    for (const std::string& p : paths) {
      size_t n = 0, bad = 0;
      char* text = nullptr;
      if (!ok(tgpt_validate(p.c_str(), &n, &bad, &text))) return report(ok.status);
      std::fputs(text, stdout);
      tgpt_string_free(text);
      files += n;
      invalid += bad;
    }
    if (invalid > 0) {
      std::fprintf(stderr, "error: SchemaViolation: %zu of %zu files invalid\n", invalid, files);
      rc = 1;
    } else {
      std::printf("%zu files valid\n", files);
    }
  } else if (train->parsed()) {
    double first = 0, last = 0;
    if (!ok(resolve(o, ModeTarget::kTrain, &cfg))) return report(ok.status);
    std::string run_dir = o.out;
    if (run_dir.empty()) {
      run_dir = "runs/" + (o.name.empty() ? std::string("default") : o.name);
    }
    const std::string clips = or_default(o.clips, "data");
    if (!ok(tgpt_train(cfg, clips.c_str(), run_dir.c_str(), &first, &last))) {
      rc = report(ok.status);
    } else {
      std::printf("trained %s: step-0 loss %.4f, final-step loss %.4f\n", run_dir.c_str(), first, last);
    }
  } else if (trk->parsed()) {
    size_t n = 0;
    const std::string clips = or_default(o.clips, "data");
    const tgpt_text_mode mode = text_mode_of(or_default(o.text_mode, "pred"));
    if (!ok(tgpt_track(o.out.c_str(), clips.c_str(), mode, o.workers.value_or(1), &n))) {
      rc = report(ok.status);
    } else {
      std::printf("wrote %zu predictions to %s/preds\n", n, o.out.c_str());
    }
  } else if (eval->parsed()) {
    double aj = 0, davg = 0, oa = 0;
    const std::string clips = or_default(o.clips, "data");
    const std::string preds = o.preds.empty() ? o.out + "/preds" : o.preds;
    if (!ok(tgpt_eval(clips.c_str(), preds.c_str(), o.out.c_str(), o.workers.value_or(1), &aj, &davg,
                      &oa))) {
      rc = report(ok.status);
    } else {
      std::printf("AJ %.4f  delta_avg %.4f  OA %.4f  (report in %s)\n", aj, davg, oa, o.out.c_str());
    }
  } else if (ablate->parsed()) {
    char* md = nullptr;
    const std::string out = or_default(o.out, "runs/ablate");
    if (!ok(resolve(o, ModeTarget::kInfer, &cfg)) || !ok(tgpt_ablate(cfg, out.c_str(), &md))) {
      rc = report(ok.status);
    } else {
      std::fputs(md, stdout);
      tgpt_string_free(md);
    }
  } else if (run->parsed()) {
    if (!ok(resolve(o, ModeTarget::kRun, &cfg)) || !ok(tgpt_run(cfg))) {
      rc = report(ok.status);
    } else {
      std::printf("run complete\n");
    }
  }
  tgpt_config_free(cfg);
  return rc;
}
