/* Copyright 2026 The sbvae Authors
 * SPDX-License-Identifier: Apache-2.0 */
#ifndef SBVAE_SBVAE_H_
#define SBVAE_SBVAE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SBVAE_API __declspec(dllexport)
#else
#define SBVAE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sbvae_status {
  SBVAE_OK = 0,
  SBVAE_ERR_SHAPE = 1,
  SBVAE_ERR_CONTRACT = 2,
  SBVAE_ERR_DIVERGENCE = 3,
  SBVAE_ERR_DEGENERATE = 4,
  SBVAE_ERR_MODE = 5,
  SBVAE_ERR_CONFIG = 6,
  SBVAE_ERR_IO = 7,
  SBVAE_ERR_NUMERIC = 8,
  SBVAE_ERR_INTERNAL = 9,
  /* The call ran but a check or threshold failed. */
  SBVAE_CHECK_FAILED = 10
} sbvae_status;

typedef struct sbvae_config sbvae_config;
typedef struct sbvae_model sbvae_model;

/* Message of the last failing call on this thread; never NULL. */
SBVAE_API const char* sbvae_last_error(void);
SBVAE_API const char* sbvae_version(void);
SBVAE_API const char* sbvae_status_name(sbvae_status s);

/* Progress lines and warnings. NULL restores the default (stderr). */
typedef void (*sbvae_message_fn)(const char* line, void* user);
SBVAE_API void sbvae_set_message_handler(sbvae_message_fn fn, void* user);

/* Configuration. */
SBVAE_API sbvae_status sbvae_config_new(sbvae_config** out);
SBVAE_API sbvae_status sbvae_config_load(const char* path, sbvae_config** out);
/* "dotted.key=value"; value parsed as JSON, else taken as a string. */
SBVAE_API sbvae_status sbvae_config_set(sbvae_config* cfg, const char* assignment);
/* Copies the JSON text into buf (NUL-terminated when it fits); *needed gets
 * the full length including the terminator. */
SBVAE_API sbvae_status sbvae_config_json(const sbvae_config* cfg, char* buf, size_t cap, size_t* needed);
SBVAE_API int sbvae_config_dim(const sbvae_config* cfg);
SBVAE_API uint64_t sbvae_config_seed(const sbvae_config* cfg);
SBVAE_API void sbvae_config_free(sbvae_config* cfg);

/* Output directory for a command: explicit, config, SBVAE_OUTPUT_ROOT, runs/. */
SBVAE_API sbvae_status sbvae_output_dir(const sbvae_config* cfg, const char* explicit_dir, const char* command,
                                        char* buf, size_t cap, size_t* needed);

/* Training. Returns SBVAE_CHECK_FAILED when a non-finite loss stopped the run;
 * model.ckpt then holds the last good parameters. */
SBVAE_API sbvae_status sbvae_train(const sbvae_config* cfg, const char* run_dir);

/* Models. checkpoint may be NULL for <run_dir>/model.ckpt. */
SBVAE_API sbvae_status sbvae_model_load(const char* run_dir, const char* checkpoint, sbvae_model** out);
/* Oracle model (cfg must set oracle=true) or the untrained initialization. */
SBVAE_API sbvae_status sbvae_model_from_config(const sbvae_config* cfg, sbvae_model** out);
SBVAE_API int sbvae_model_dim(const sbvae_model* m);
SBVAE_API void sbvae_model_free(sbvae_model* m);

typedef struct sbvae_sample_options {
  const char* method; /* sde | pf-ode-sb | pf-ode-sbm; NULL uses the config */
  const char* scheme; /* heun | rk4; NULL uses the config */
  int64_t n_samples;  /* < 0 uses the config */
  int steps;          /* <= 0 uses the config */
  int has_seed;
  uint64_t seed;
  int raw_units; /* undo the data standardization */
} sbvae_sample_options;

SBVAE_API void sbvae_sample_options_init(sbvae_sample_options* o);
/* Writes n x d doubles row-major into out (capacity in doubles). */
SBVAE_API sbvae_status sbvae_sample(const sbvae_model* m, const sbvae_sample_options* o, double* out, size_t cap,
                                    int64_t* rows);
/* Writes samples.csv (header only when n = 0), samples.svg when svg != 0 and
 * d = 2, and config.json / manifest.json into out_dir. */
SBVAE_API sbvae_status sbvae_sample_run(const sbvae_model* m, const sbvae_sample_options* o, const char* out_dir,
                                        int svg);

typedef struct sbvae_eval_options {
  const char* samples_csv;   /* NULL: draw from the model */
  const char* reference_csv; /* NULL: held-out draws from the dataset generator */
  const sbvae_model* model;   /* optional; enables model metrics */
  const sbvae_config* config; /* used when model is NULL */
  double max_sliced_w2; /* thresholds; NaN disables */
  double max_knn_kl;
  double max_score_mse;
  double max_prior_gap;
} sbvae_eval_options;

SBVAE_API void sbvae_eval_options_init(sbvae_eval_options* o);
/* Writes metrics.json, config.json and manifest.json into out_dir, nothing
 * on error; SBVAE_CHECK_FAILED when a threshold is exceeded. */
SBVAE_API sbvae_status sbvae_eval(const sbvae_eval_options* o, const char* out_dir);
/* Config carried by a model (borrowed; valid while the model lives). */
SBVAE_API const sbvae_config* sbvae_model_config(const sbvae_model* m);

/* Runs the identity suite, writes reports.jsonl and summary.txt under out_dir
 * and sends the summary table to the message handler. SBVAE_CHECK_FAILED when
 * any check fails. */
SBVAE_API sbvae_status sbvae_verify(uint64_t seed, double perturbation, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* SBVAE_SBVAE_H_ */
