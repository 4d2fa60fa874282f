/* Copyright (C) 2026 The mvprune Authors */
/* SPDX-License-Identifier: Apache-2.0 */

/*
 * C interface to mvprune.
 *
 * Every function returns an mvp_status. On failure the thread-local message
 * returned by mvp_last_error() describes the problem; it stays valid until
 * the next call on the same thread. Strings handed out through char** must
 * be released with mvp_string_free, handles with their own *_free function.
 * Passing NULL to a *_free function is a no-op.
 *
 * Array outputs follow one convention: the caller passes a buffer and its
 * capacity; *len always receives the required length, and MVP_ERR_BUFFER is
 * returned when the capacity is too small.
 */

#ifndef MVPRUNE_H
#define MVPRUNE_H

#include <stddef.h>
#include <stdint.h>

#if defined(MVP_BUILDING_LIBRARY)
#define MVP_API __attribute__((visibility("default")))
#else
#define MVP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mvp_status {
    MVP_OK = 0,
    MVP_ERR_NULL = 1,       /* required pointer argument was NULL */
    MVP_ERR_CONTRACT = 2,   /* argument violates a precondition */
    MVP_ERR_CONFIG = 3,     /* configuration value out of domain */
    MVP_ERR_PARSE = 4,      /* malformed record or file */
    MVP_ERR_IO = 5,
    MVP_ERR_TRAINING = 6,   /* non-finite loss */
    MVP_ERR_ANNOTATION = 7, /* inconsistent boxes or geometry */
    MVP_ERR_VALIDATION = 8, /* annotation invariant violated */
    MVP_ERR_INVARIANT = 9,  /* pipeline post-condition violated */
    MVP_ERR_BUFFER = 10,    /* output buffer too small */
    MVP_ERR_INTERNAL = 11
} mvp_status;

typedef struct mvp_config mvp_config;
typedef struct mvp_predictor mvp_predictor;
typedef struct mvp_observation mvp_observation;
typedef struct mvp_result mvp_result;
typedef struct mvp_report mvp_report;

MVP_API const char* mvp_version(void);
MVP_API const char* mvp_last_error(void);
MVP_API const char* mvp_status_name(mvp_status status);
MVP_API void mvp_string_free(char* s);

/* Experiment configuration. */
MVP_API mvp_status mvp_config_new(mvp_config** out);
MVP_API mvp_status mvp_config_load(const char* path, mvp_config** out);
/* Flat keys, e.g. "beta", "alphas" ("0.3,0.2,0.2"), "strategy", "learning_rate". */
MVP_API mvp_status mvp_config_set(mvp_config* config, const char* key, const char* value);
MVP_API mvp_status mvp_config_get(const mvp_config* config, const char* key, char** out);
MVP_API mvp_status mvp_config_validate(const mvp_config* config);
MVP_API mvp_status mvp_config_to_json(const mvp_config* config, char** out);
MVP_API void mvp_config_free(mvp_config* config);

/* Workflows. Output directories are created when missing. */

/* Writes n_episodes episodes plus manifest.txt under out_dir. */
MVP_API mvp_status mvp_generate_corpus(const mvp_config* config, size_t n_episodes, const char* out_dir);
/* Geometry JSONL in, annotation JSONL out. detection_view < 0 selects the
 * head view. *warnings (optional) receives the phase-warning count. */
MVP_API mvp_status mvp_annotate_file(const char* geometry_path, const char* out_path, int detection_view,
                                     int debounce_frames, size_t* warnings);
/* Converts between the manual text format and annotation JSONL. */
MVP_API mvp_status mvp_manual_to_jsonl(const char* manual_path, const char* out_path);
MVP_API mvp_status mvp_jsonl_to_manual(const char* jsonl_path, const char* out_path);
/* Accepts annotation JSONL or the manual format. On MVP_ERR_VALIDATION
 * *bad_frame (optional) receives the offending frame. */
MVP_API mvp_status mvp_validate_annotation(const char* path, int64_t* bad_frame);
/* Trains both predictors and writes intra.ckpt.json, inter.ckpt.json and
 * loss_trace.csv under out_dir. */
MVP_API mvp_status mvp_train(const mvp_config* config, const char* out_dir);
MVP_API mvp_status mvp_run_experiment(const mvp_config* config, const char* out_dir, mvp_report** out);
/* scale_mode 0 sweeps beta, 1 scales every ratio. *csv is optional. */
MVP_API mvp_status mvp_sweep(const mvp_config* config, const double* values, size_t n_values, int scale_mode,
                             const char* out_dir, char** csv);
MVP_API mvp_status mvp_compare(const mvp_config* config, const char* out_dir, char** csv);
/* Prunes every observation of a JSONL stream with the given checkpoints and
 * writes one PruneResult record per frame. */
MVP_API mvp_status mvp_prune_stream(const mvp_config* config, const char* observations_path,
                                    const char* intra_checkpoint, const char* inter_checkpoint, const char* out_path,
                                    size_t* frames);

/* Reports. Metric names match the rows of report.csv. */
MVP_API mvp_status mvp_report_csv(const mvp_report* report, char** out);
MVP_API mvp_status mvp_report_get(const mvp_report* report, const char* metric, double* out);
MVP_API void mvp_report_free(mvp_report* report);

/* Predictors. */
MVP_API mvp_status mvp_predictor_new(int inputs, int hidden, int outputs, uint64_t seed, mvp_predictor** out);
MVP_API mvp_status mvp_predictor_load(const char* path, mvp_predictor** out);
MVP_API mvp_status mvp_predictor_save(const mvp_predictor* predictor, const char* path);
MVP_API mvp_status mvp_predictor_forward(const mvp_predictor* predictor, const double* input, size_t input_len,
                                         double* out, size_t cap, size_t* len);
MVP_API void mvp_predictor_free(mvp_predictor* predictor);

/* Observations. tokens[v] holds heights[v]*widths[v]*embed_dim values
 * row-major, cls[v] holds embed_dim values. */
MVP_API mvp_status mvp_observation_new(size_t views, const int* heights, const int* widths, int embed_dim,
                                       const double* const* tokens, const double* const* cls, int64_t frame_index,
                                       mvp_observation** out);
MVP_API mvp_status mvp_observation_parse(const char* jsonl_line, mvp_observation** out);
MVP_API void mvp_observation_free(mvp_observation* obs);

/* Pruning with the config's ratios and strategy. */
MVP_API mvp_status mvp_prune(const mvp_observation* obs, const mvp_predictor* intra, const mvp_predictor* inter,
                             const mvp_config* config, mvp_result** out);
MVP_API mvp_status mvp_result_view_count(const mvp_result* result, size_t* out);
MVP_API mvp_status mvp_result_kept_total(const mvp_result* result, size_t* out);
MVP_API mvp_status mvp_result_kept(const mvp_result* result, size_t view, int* out, size_t cap, size_t* len);
MVP_API mvp_status mvp_result_to_json(const mvp_result* result, char** out);
MVP_API void mvp_result_free(mvp_result* result);

/* Stateless helpers. */
MVP_API mvp_status mvp_adaptive_weight(const double* raw, int height, int width, double epsilon, double* out);
MVP_API mvp_status mvp_flop_speedup(size_t tokens_before, size_t tokens_after, int layers, int d_model,
                                    double* out);

#ifdef __cplusplus
}
#endif

#endif /* MVPRUNE_H */
