#ifndef TGPT_TGPT_H
#define TGPT_TGPT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define TGPT_API __declspec(dllexport)
#else
#define TGPT_API __attribute__((visibility("default")))
#endif

/* Status codes. Every function returns one; details of the most recent
   failure on the calling thread are available from tgpt_last_error(). */
typedef enum tgpt_status {
  TGPT_OK = 0,
  TGPT_MALFORMED_DOCUMENT,
  TGPT_SCHEMA_VIOLATION,
  TGPT_SHAPE_MISMATCH,
  TGPT_NON_POSITIVE_DELTA,
  TGPT_TRAJECTORY_TOO_SHORT,
  TGPT_INDEX_OUT_OF_RANGE,
  TGPT_DETACHED_TENSOR,
  TGPT_MISSING_GRAD,
  TGPT_INVALID_CONFIG,
  TGPT_TOO_FEW_CLIPS,
  TGPT_BAD_FRAME_SHAPE,
  TGPT_OUT_OF_BOUNDS,
  TGPT_VOCABULARY_MISMATCH,
  TGPT_FRAME_COVERAGE_GAP,
  TGPT_EMPTY_CLIP,
  TGPT_ZERO_EXTENT,
  TGPT_NO_VISIBLE_POINTS,
  TGPT_EMPTY_EVAL,
  TGPT_NO_ENDPOINT_GT,
  TGPT_BAD_CHECKPOINT,
  TGPT_IO,
  TGPT_INVALID_ARGUMENT,
  TGPT_INTERNAL
} tgpt_status;

typedef enum tgpt_text_mode {
  TGPT_TEXT_GT = 0,
  TGPT_TEXT_PRED = 1,
  TGPT_TEXT_NONE = 2
} tgpt_text_mode;

typedef enum tgpt_clip_size {
  TGPT_CLIP_SHORT = 0,
  TGPT_CLIP_LONG = 1
} tgpt_clip_size;

typedef struct tgpt_config tgpt_config;
typedef struct tgpt_clip tgpt_clip;
typedef struct tgpt_model tgpt_model;
typedef struct tgpt_prediction tgpt_prediction;

/* CamelCase category name of a status, e.g. "SchemaViolation". */
TGPT_API const char* tgpt_status_name(tgpt_status status);
/* Message of the last failure on this thread; "" after a success. */
TGPT_API const char* tgpt_last_error(void);
/* Strings returned through char** out-parameters are released with this. */
TGPT_API void tgpt_string_free(char* s);

/* ---- run configuration ---- */

TGPT_API tgpt_status tgpt_config_new(tgpt_config** out);
/* Overlays a JSON document (or a file, for _load) on the defaults. */
TGPT_API tgpt_status tgpt_config_from_json(const char* json, tgpt_config** out);
TGPT_API tgpt_status tgpt_config_load(const char* path, tgpt_config** out);
/* Overlays JSON onto an existing config. */
TGPT_API tgpt_status tgpt_config_merge_json(tgpt_config* cfg, const char* json);
TGPT_API tgpt_status tgpt_config_to_json(const tgpt_config* cfg, char** out);
TGPT_API void tgpt_config_free(tgpt_config* cfg);

TGPT_API tgpt_status tgpt_config_set_seed(tgpt_config* cfg, uint64_t seed);
TGPT_API tgpt_status tgpt_config_set_steps(tgpt_config* cfg, int steps);
TGPT_API tgpt_status tgpt_config_set_workers(tgpt_config* cfg, int workers);
TGPT_API tgpt_status tgpt_config_set_clip_size(tgpt_config* cfg, tgpt_clip_size size);
/* Inference text mode; training always uses the config's train_text_mode. */
TGPT_API tgpt_status tgpt_config_set_text_mode(tgpt_config* cfg, tgpt_text_mode mode);
TGPT_API tgpt_status tgpt_config_set_train_text_mode(tgpt_config* cfg, tgpt_text_mode mode);
/* Same clip count for every scenario in the config. */
TGPT_API tgpt_status tgpt_config_set_clips_per_scenario(tgpt_config* cfg, int count);
TGPT_API tgpt_status tgpt_config_set_name(tgpt_config* cfg, const char* name);
TGPT_API tgpt_status tgpt_config_set_runs_dir(tgpt_config* cfg, const char* dir);

/* ---- pipeline commands ---- */

/* Writes <out_dir>/{train,test}/<clip>.vlspt.json + .frames.bin. */
TGPT_API tgpt_status tgpt_gen(const tgpt_config* cfg, const char* out_dir, size_t* n_train,
                              size_t* n_test);
/* Checks a clip file or every clip file in a directory. The report holds one
   line per problem ("<path>: <Category>: detail"); n_invalid counts files
   with at least one problem. */
TGPT_API tgpt_status tgpt_validate(const char* path, size_t* n_files, size_t* n_invalid,
                                   char** report);
/* Trains on <clips_dir>/train (or clips_dir) and writes config.json,
   checkpoint.tgpt and loss.csv into run_dir. Loss outputs may be NULL. */
TGPT_API tgpt_status tgpt_train(const tgpt_config* cfg, const char* clips_dir, const char* run_dir,
                                double* first_loss, double* last_loss);
/* Tracks <clips_dir>/test (or clips_dir) with the model in run_dir and writes
   <run_dir>/preds/<clip>.pred.json. */
TGPT_API tgpt_status tgpt_track(const char* run_dir, const char* clips_dir, tgpt_text_mode mode,
                                int workers, size_t* n_written);
/* Writes report.csv and report.md into out_dir. mean_* may be NULL. */
TGPT_API tgpt_status tgpt_eval(const char* gt_dir, const char* pred_dir, const char* out_dir,
                               int workers, double* mean_aj, double* mean_delta_avg,
                               double* mean_oa);
/* Text on/off x short/long matrix as markdown; also written to
   <out_dir>/ablation.md. */
TGPT_API tgpt_status tgpt_ablate(const tgpt_config* cfg, const char* out_dir, char** markdown);
/* gen, train, track and eval inside <runs_dir>/<name>. */
TGPT_API tgpt_status tgpt_run(const tgpt_config* cfg);

/* ---- in-memory use ---- */

TGPT_API tgpt_status tgpt_clip_load(const char* clip_path, tgpt_clip** out);
TGPT_API size_t tgpt_clip_frame_count(const tgpt_clip* clip);
TGPT_API size_t tgpt_clip_track_count(const tgpt_clip* clip);
TGPT_API void tgpt_clip_free(tgpt_clip* clip);

TGPT_API tgpt_status tgpt_model_load(const char* run_dir, tgpt_model** out);
TGPT_API void tgpt_model_free(tgpt_model* model);

TGPT_API tgpt_status tgpt_track_clip(const tgpt_model* model, const tgpt_clip* clip,
                                     tgpt_text_mode mode, tgpt_prediction** out);
/* Refined coordinate of one track at one frame. */
TGPT_API tgpt_status tgpt_prediction_coord(const tgpt_prediction* pred, size_t frame,
                                           size_t track, double* x, double* y, int* visible);
TGPT_API tgpt_status tgpt_prediction_to_json(const tgpt_prediction* pred, char** out);
TGPT_API void tgpt_prediction_free(tgpt_prediction* pred);

#ifdef __cplusplus
}
#endif

#endif
