#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "tgpt/tgpt.h"

namespace fs = std::filesystem;

namespace {

struct Config {
  tgpt_config* p = nullptr;
  Config() { EXPECT_EQ(tgpt_config_new(&p), TGPT_OK); }
  ~Config() { tgpt_config_free(p); }
};

fs::path scratch(const char* name) {
  const fs::path p = fs::temp_directory_path() / (std::string("tgpt_capi_") + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(CApi, StatusNames) {
  EXPECT_STREQ(tgpt_status_name(TGPT_OK), "Ok");
  EXPECT_STREQ(tgpt_status_name(TGPT_SCHEMA_VIOLATION), "SchemaViolation");
  EXPECT_STREQ(tgpt_status_name(TGPT_INTERNAL), "Internal");
  EXPECT_STREQ(tgpt_status_name(static_cast<tgpt_status>(999)), "Unknown");
}

TEST(CApi, ConfigJsonAndErrors) {
  Config c;
  EXPECT_EQ(tgpt_config_set_seed(c.p, 42), TGPT_OK);
  EXPECT_STREQ(tgpt_last_error(), "");
  EXPECT_EQ(tgpt_config_set_steps(c.p, -1), TGPT_INVALID_CONFIG);
  EXPECT_NE(std::strlen(tgpt_last_error()), 0u);
  EXPECT_EQ(tgpt_config_set_seed(nullptr, 1), TGPT_INVALID_ARGUMENT);
  EXPECT_EQ(tgpt_config_merge_json(c.p, "{\"bogus\": 1}"), TGPT_INVALID_CONFIG);

  char* json = nullptr;
  ASSERT_EQ(tgpt_config_to_json(c.p, &json), TGPT_OK);
  EXPECT_NE(std::string(json).find("\"seed\": 42"), std::string::npos);
  tgpt_config* back = nullptr;
  ASSERT_EQ(tgpt_config_from_json(json, &back), TGPT_OK);
  char* again = nullptr;
  ASSERT_EQ(tgpt_config_to_json(back, &again), TGPT_OK);
  EXPECT_STREQ(json, again);
  tgpt_string_free(json);
  tgpt_string_free(again);
  tgpt_config_free(back);
}

TEST(CApi, EndToEndSmallRun) {
  const fs::path dir = scratch("e2e");
  Config c;
  ASSERT_EQ(tgpt_config_set_seed(c.p, 3), TGPT_OK);
  ASSERT_EQ(tgpt_config_set_clips_per_scenario(c.p, 5), TGPT_OK);
  ASSERT_EQ(tgpt_config_set_clip_size(c.p, TGPT_CLIP_SHORT), TGPT_OK);
  ASSERT_EQ(tgpt_config_merge_json(c.p, "{\"n_points\": 2}"), TGPT_OK);
  ASSERT_EQ(tgpt_config_set_steps(c.p, 2), TGPT_OK);

  size_t n_train = 0, n_test = 0;
  const std::string data = (dir / "data").string(), run = (dir / "run").string();
  ASSERT_EQ(tgpt_gen(c.p, data.c_str(), &n_train, &n_test), TGPT_OK) << tgpt_last_error();
  EXPECT_EQ(n_train, 24u);
  EXPECT_EQ(n_test, 6u);

  size_t n_files = 0, n_invalid = 0;
  char* report = nullptr;
  ASSERT_EQ(tgpt_validate((dir / "data" / "test").string().c_str(), &n_files, &n_invalid, &report), TGPT_OK);
  EXPECT_EQ(n_files, 6u);
  EXPECT_EQ(n_invalid, 0u);
  tgpt_string_free(report);

  double first = 0, last = 0;
  ASSERT_EQ(tgpt_train(c.p, data.c_str(), run.c_str(), &first, &last), TGPT_OK) << tgpt_last_error();
  EXPECT_GT(first, 0.0);

  size_t written = 0;
  ASSERT_EQ(tgpt_track(run.c_str(), data.c_str(), TGPT_TEXT_PRED, 1, &written), TGPT_OK) << tgpt_last_error();
  EXPECT_EQ(written, 6u);
  double aj = -1, delta = -1, oa = -1;
  ASSERT_EQ(tgpt_eval(data.c_str(), (dir / "run" / "preds").string().c_str(), run.c_str(), 1, &aj, &delta, &oa),
            TGPT_OK)
      << tgpt_last_error();
  for (double v : {aj, delta, oa}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }

  tgpt_model* model = nullptr;
  ASSERT_EQ(tgpt_model_load(run.c_str(), &model), TGPT_OK) << tgpt_last_error();
  fs::path clip_path;
  for (const auto& e : fs::directory_iterator(dir / "data" / "test"))
    if (e.path().string().ends_with(".vlspt.json")) clip_path = e.path();
  tgpt_clip* clip = nullptr;
  ASSERT_EQ(tgpt_clip_load(clip_path.string().c_str(), &clip), TGPT_OK) << tgpt_last_error();
  EXPECT_EQ(tgpt_clip_frame_count(clip), 8u);
  EXPECT_EQ(tgpt_clip_track_count(clip) > 0, true);

  tgpt_prediction* pred = nullptr;
  ASSERT_EQ(tgpt_track_clip(model, clip, TGPT_TEXT_NONE, &pred), TGPT_OK) << tgpt_last_error();
  double x = -1, y = -1;
  int visible = -1;
  EXPECT_EQ(tgpt_prediction_coord(pred, 0, 0, &x, &y, &visible), TGPT_OK);
  EXPECT_EQ(visible, 1);
  EXPECT_EQ(tgpt_prediction_coord(pred, 1000, 0, &x, &y, &visible), TGPT_INDEX_OUT_OF_RANGE);
  char* json = nullptr;
  ASSERT_EQ(tgpt_prediction_to_json(pred, &json), TGPT_OK);
  EXPECT_NE(std::string(json).find("\"tracks\""), std::string::npos);
  tgpt_string_free(json);

  tgpt_prediction_free(pred);
  tgpt_clip_free(clip);
  tgpt_model_free(model);
  fs::remove_all(dir);
}

TEST(CApi, ClipLoadFailuresAreCategorised) {
  const fs::path dir = scratch("bad");
  fs::create_directories(dir);
  const fs::path p = dir / "x.vlspt.json";
  std::FILE* f = std::fopen(p.string().c_str(), "w");
  ASSERT_NE(f, nullptr);
  std::fputs("{ broken", f);
  std::fclose(f);
  tgpt_clip* clip = nullptr;
  EXPECT_EQ(tgpt_clip_load(p.string().c_str(), &clip), TGPT_MALFORMED_DOCUMENT);
  EXPECT_EQ(clip, nullptr);
  EXPECT_EQ(tgpt_clip_load((dir / "missing.vlspt.json").string().c_str(), &clip), TGPT_IO);
  fs::remove_all(dir);
}
