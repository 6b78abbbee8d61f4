#ifndef LIFTKIT_LIFTKIT_H
#define LIFTKIT_LIFTKIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(LIFTKIT_BUILDING_LIBRARY)
#define LK_API __attribute__((visibility("default")))
#else
#define LK_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lk_status {
  LK_OK = 0,
  LK_ERR_CONFIG = 1,
  LK_ERR_DATA = 2,
  LK_ERR_NUMERIC = 3,
  LK_ERR_INTERNAL = 4
} lk_status;

typedef struct lk_model lk_model;

typedef struct lk_model_config {
  size_t hidden_dim;
  size_t heads;
  size_t blocks;
  size_t ffn_dim;
  size_t receptive_field;
  size_t joints;
  int share_attention;
  double dropout;
  int causal;
  int output_last_token; /* 0: center token, 1: last token */
  double output_scale;
} lk_model_config;

typedef struct lk_train_options {
  int has_seed;
  uint64_t seed;
  size_t epochs;     /* 0 keeps the config value */
  size_t batch_size; /* 0 keeps the config value */
  size_t max_steps;  /* 0 keeps the config value */
} lk_train_options;

typedef struct lk_synth_options {
  uint64_t seed;
  size_t frames;
  size_t sequences;
  const char* skeleton; /* built-in name, NULL for h36m_17 */
} lk_synth_options;

/* Message of the last failed call on this thread; empty after success. */
LK_API const char* lk_last_error(void);
LK_API const char* lk_version(void);

/* Strings returned through char** out-parameters are released with this. */
LK_API void lk_string_free(char* s);

/* Reads LIFTKIT_SEED; *present is 0 when unset. */
LK_API lk_status lk_seed_from_env(uint64_t* seed, int* present);

LK_API void lk_model_config_default(lk_model_config* config);
LK_API void lk_train_options_default(lk_train_options* options);
LK_API void lk_synth_options_default(lk_synth_options* options);

LK_API lk_status lk_count_params(const lk_model_config* config, uint64_t* count);
LK_API lk_status lk_count_params_json(const lk_model_config* config, char** json);
LK_API lk_status lk_reference_table_json(char** json);

LK_API lk_status lk_model_build(const lk_model_config* config, uint64_t seed, lk_model** model);
LK_API lk_status lk_model_load(const char* path, lk_model** model);
LK_API lk_status lk_model_save(const lk_model* model, const char* path);
LK_API void lk_model_free(lk_model* model);
LK_API lk_status lk_model_get_config(const lk_model* model, lk_model_config* config);
LK_API lk_status lk_model_param_count(const lk_model* model, uint64_t* count);
LK_API lk_status lk_model_set_causal(lk_model* model, int causal);

/* windows: batch * receptive_field * 2 * joints floats; out: batch * 3 * joints. */
LK_API lk_status lk_model_forward(const lk_model* model, const float* windows, size_t batch, float* out);

LK_API lk_status lk_train(const char* config_path, const char* data_path, const char* out_dir,
                          const lk_train_options* options, char** report_json);
LK_API lk_status lk_eval(const char* checkpoint_path, const char* data_path, char** report_json);

/* causal: -1 keeps the checkpoint setting, 0 or 1 overrides it. */
LK_API lk_status lk_lift(const char* checkpoint_path, const char* data_path, const char* out_path, int causal);
LK_API lk_status lk_synth(const lk_synth_options* options, const char* out_path);

#ifdef __cplusplus
}
#endif

#endif
