// Copyright 2026 The DeepVOX Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the DeepVOX toolkit.
 *
 * Every call returns a dvx_status. On failure the message is available from
 * dvx_last_error() on the calling thread until the next failing call.
 *
 * Pipeline commands take a dvx_config: a flat set of dotted key=value
 * options. Each command accepts a fixed set of keys (see dvx_option_info);
 * unknown keys and unparsable values fail with DVX_ERR_USAGE.
 */

#ifndef DEEPVOX_DEEPVOX_H_
#define DEEPVOX_DEEPVOX_H_

#include <stddef.h>

#if defined(DEEPVOX_BUILDING_LIBRARY)
#define DVX_API __attribute__((visibility("default")))
#else
#define DVX_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dvx_status {
  DVX_OK = 0,
  DVX_ERR_USAGE = 1,    /* bad argument, option or state */
  DVX_ERR_DATA = 2,     /* malformed or insufficient input data */
  DVX_ERR_IO = 3,       /* file could not be read or written */
  DVX_ERR_NUMERIC = 4,  /* non-finite values, divergence */
  DVX_ERR_INTERNAL = 5
} dvx_status;

DVX_API const char* dvx_version(void);
DVX_API const char* dvx_last_error(void);
DVX_API const char* dvx_status_name(dvx_status status);

/* threads <= 0 selects the number of available cores. */
DVX_API void dvx_set_threads(int threads);
DVX_API int dvx_threads(void);
/* "error", "info" or "debug". */
DVX_API dvx_status dvx_set_log_level(const char* level);

/* ---- Options ---------------------------------------------------------- */

typedef struct dvx_config dvx_config;

DVX_API dvx_status dvx_config_create(dvx_config** out);
DVX_API void dvx_config_free(dvx_config* config);
/* Later values replace earlier ones. */
DVX_API dvx_status dvx_config_set(dvx_config* config, const char* key,
                                  const char* value);
/* Reads "key=value" lines; blank lines and lines starting with '#' are
 * skipped. Keys already present are kept when keep_existing is nonzero. */
DVX_API dvx_status dvx_config_load(dvx_config* config, const char* path,
                                   int keep_existing);
DVX_API dvx_status dvx_config_unset(dvx_config* config, const char* key);
/* *value is NULL when the key is unset. Valid until the next set. */
DVX_API dvx_status dvx_config_get(const dvx_config* config, const char* key,
                                  const char** value);

/* Commands: synth, degrade, train, extract, score, eval, ablate, fbank. */
DVX_API size_t dvx_command_count(void);
DVX_API const char* dvx_command_name(size_t index);
DVX_API const char* dvx_command_help(const char* command);
DVX_API size_t dvx_option_count(const char* command);
/* Describes option `index` of `command`. default_value is "" for required
 * options. Any output pointer may be NULL. */
DVX_API dvx_status dvx_option_info(const char* command, size_t index,
                                   const char** key, const char** default_value,
                                   const char** help, int* required);

/* Runs a command with the options in `config` (defaults fill the rest). */
DVX_API dvx_status dvx_run(const char* command, const dvx_config* config);

/* ---- Models ----------------------------------------------------------- */

typedef struct dvx_model dvx_model;

DVX_API dvx_status dvx_model_load(const char* path, dvx_model** out);
/* A freshly initialized default model. */
DVX_API dvx_status dvx_model_init(unsigned long long seed, dvx_model** out);
DVX_API void dvx_model_free(dvx_model* model);
DVX_API size_t dvx_model_embedding_dim(const dvx_model* model);
DVX_API dvx_status dvx_model_save(const dvx_model* model, const char* path);

/* Frame layout: 160 x 200 doubles, unit by unit (unit j at [160 j, 160 j + 160)).
 * Features: 40 x 200 row-major. Embedding: dvx_model_embedding_dim floats. */
DVX_API dvx_status dvx_frame_from_clip(const double* clip, size_t samples,
                                       double* frame);
DVX_API dvx_status dvx_extract_features(const dvx_model* model,
                                        const double* frame, float* features);
DVX_API dvx_status dvx_embed_frame(const dvx_model* model, const double* frame,
                                   float* embedding);
DVX_API dvx_status dvx_cosine(const float* a, const float* b, size_t dim,
                              double* score);

/* ---- Metrics ---------------------------------------------------------- */

typedef struct dvx_metrics {
  double eer_pct;
  double eer_threshold;
  double tmr_pct_at_fmr_1pct;   /* negative when infeasible */
  double tmr_pct_at_fmr_10pct;  /* negative when infeasible */
  double min_dcf_p001;          /* normalized, p_target 0.001 */
  double min_dcf_p01;           /* normalized, p_target 0.01 */
} dvx_metrics;

DVX_API dvx_status dvx_evaluate_scores(const double* genuine, size_t n_genuine,
                                       const double* impostor, size_t n_impostor,
                                       dvx_metrics* out);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* DEEPVOX_DEEPVOX_H_ */
