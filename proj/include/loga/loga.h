/* LOGA: local-global associative assembling for video tracklet
 * representation learning. C API over the core library: opaque handles,
 * integer status codes, thread-local error messages. */

#ifndef LOGA_H
#define LOGA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LOGA_API __declspec(dllexport)
#else
#define LOGA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum loga_status {
  LOGA_OK = 0,
  LOGA_E_INVALID_ARG = 1,
  LOGA_E_DIM = 2,        /* tensor shape mismatch */
  LOGA_E_CONFIG = 3,     /* bad configuration value */
  LOGA_E_DATA = 4,       /* bad runtime data */
  LOGA_E_VALIDATION = 5, /* inconsistent dataset manifest */
  LOGA_E_IO = 6,
  LOGA_E_VERSION = 7,    /* unknown container / checkpoint version */
  LOGA_E_CHECKSUM = 8,
  LOGA_E_TRUNCATED = 9,
  LOGA_E_CONTRACT = 10,  /* API contract violation */
  LOGA_E_LOOKUP = 11,    /* unknown clip / tracklet id */
  LOGA_E_NUMERIC = 12,   /* non-finite loss */
  LOGA_E_INTERNAL = 13
} loga_status;

LOGA_API const char* loga_status_name(loga_status status);

/* Message describing the most recent failure on this thread. */
LOGA_API const char* loga_last_error(void);

LOGA_API const char* loga_version(void);

/* Frees strings returned through char** out-parameters. */
LOGA_API void loga_string_free(char* s);

typedef void (*loga_log_fn)(const char* line, void* user);

/* ------------------------------------------------------------------ */
/* datasets                                                            */
/* ------------------------------------------------------------------ */

typedef struct loga_dataset loga_dataset;

typedef struct loga_dataset_info {
  uint64_t seed;
  int32_t num_identities;
  int32_t tracklets_per_identity;
  int32_t frames_per_tracklet;
  int32_t clip_len;
  int32_t height, width, channels;
  int32_t num_cameras;
  int32_t num_clips;
  int32_t train_clips, query_tracklets, gallery_tracklets;
} loga_dataset_info;

/* Renders the synthetic benchmark described by the JSON manifest into
 * out_dir (manifest.json + chunk files). Deterministic per seed. */
LOGA_API loga_status loga_generate_dataset(const char* manifest_path, const char* out_dir);

LOGA_API loga_status loga_dataset_open(const char* dir, loga_dataset** out);
LOGA_API void loga_dataset_close(loga_dataset* dataset);
LOGA_API loga_status loga_dataset_info_get(const loga_dataset* dataset, loga_dataset_info* info);

/* ------------------------------------------------------------------ */
/* training / checkpoints                                              */
/* ------------------------------------------------------------------ */

typedef struct loga_model loga_model;

/* Trains on the dataset and writes the final checkpoint to ckpt_out.
 * config_path may be NULL for the built-in defaults. When have_seed is
 * nonzero `seed` overrides the config seed. log/user may be NULL. */
LOGA_API loga_status loga_train(const char* config_path, const char* data_dir,
                                const char* ckpt_out, uint64_t seed, int have_seed,
                                loga_log_fn log, void* user);

LOGA_API loga_status loga_model_load(const char* ckpt_path, loga_model** out);
LOGA_API void loga_model_free(loga_model* model);

/* ------------------------------------------------------------------ */
/* evaluation                                                          */
/* ------------------------------------------------------------------ */

#define LOGA_CMC_RANKS 20

typedef struct loga_eval_result {
  double cmc[LOGA_CMC_RANKS]; /* rank-k accuracy, k = 1..20 */
  double map;
  int32_t num_queries;   /* queries contributing to the metrics */
  int32_t skipped_queries; /* queries with no valid gallery match */
} loga_eval_result;

LOGA_API loga_status loga_evaluate(const loga_model* model, const loga_dataset* dataset,
                                   loga_eval_result* result);

/* Per-frame w_local / w_global score dump (CSV) for the given clips.
 * amplify != 0 scales the scores by 1000. Free *out with loga_string_free. */
LOGA_API loga_status loga_inspect(const loga_model* model, const loga_dataset* dataset,
                                  const uint32_t* clip_ids, size_t num_clips, int amplify,
                                  char** out);

/* Whole-model gradient verification against central finite differences.
 * dtype is "float64" (contractual) or "float32" (informational). */
LOGA_API loga_status loga_gradcheck(const char* dtype, uint64_t seed, char** report,
                                    int* passed);

/* Trains and evaluates every assembling strategy num_seeds times
 * (seeds base_seed, base_seed+1, ...) and renders a comparison table.
 * config_path may be NULL. Free *table with loga_string_free. */
LOGA_API loga_status loga_ablate(const char* config_path, const char* data_dir, int num_seeds,
                                 uint64_t base_seed, loga_log_fn log, void* user, char** table);

#ifdef __cplusplus
}
#endif

#endif /* LOGA_H */
