/* Copyright 2026 The EmergeLab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the EmergeLab core.
 *
 * Every fallible call returns an emlab_status. On failure a message is
 * available from emlab_last_error() on the calling thread until the next
 * failing call on that thread. Objects are opaque handles owned by the
 * caller and released with the matching *_free function (NULL is
 * accepted). Handles are not synchronized; share one across threads only
 * for read-only calls.
 */

#ifndef EMERGELAB_EMERGELAB_H_
#define EMERGELAB_EMERGELAB_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EMLAB_API __declspec(dllexport)
#else
#define EMLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum emlab_status {
  EMLAB_OK = 0,
  EMLAB_ERR_INVALID_ARGUMENT = 1,
  EMLAB_ERR_CONFIG = 2,
  EMLAB_ERR_FORMAT = 3,
  EMLAB_ERR_IO = 4,
  EMLAB_ERR_DIVERGENCE = 5,
  /* A statistic is undefined for the input (e.g. constant ranks). */
  EMLAB_ERR_UNDEFINED = 6,
  /* A grid search found no candidate above the accuracy floor. */
  EMLAB_ERR_NO_CANDIDATE = 7,
  EMLAB_ERR_RUNTIME = 8
} emlab_status;

EMLAB_API const char* emlab_last_error(void);
EMLAB_API const char* emlab_status_name(emlab_status status);
EMLAB_API const char* emlab_version(void);

/* Independent seed derived from a master seed and up to three coordinates. */
EMLAB_API uint64_t emlab_derive_seed(uint64_t master, uint64_t a, uint64_t b,
                                     uint64_t c);

/* ---- attributes and classes ------------------------------------------ */

enum { EMLAB_COLOR = 0, EMLAB_SCALE = 1, EMLAB_SHAPE = 2 };
enum { EMLAB_NUM_CLASSES = 64, EMLAB_REPRESENTATION_DIM = 16 };

EMLAB_API emlab_status emlab_class_id_of(int color, int scale, int shape,
                                         int* class_id);
EMLAB_API emlab_status emlab_attributes_of(int class_id, int* color,
                                           int* scale, int* shape);

/* ---- datasets -------------------------------------------------------- */

typedef struct emlab_dataset emlab_dataset;

enum { EMLAB_SPLIT_TRAIN = 0, EMLAB_SPLIT_TEST = 1 };

EMLAB_API emlab_status emlab_dataset_build(int instances_per_class,
                                           int height, int width,
                                           uint64_t seed, emlab_dataset** out);
/* External "EMRG1" binary format. */
EMLAB_API emlab_status emlab_dataset_load(const char* path,
                                          emlab_dataset** out);
EMLAB_API emlab_status emlab_dataset_save(const emlab_dataset* dataset,
                                          const char* path);
EMLAB_API emlab_status emlab_dataset_info(const emlab_dataset* dataset,
                                          size_t* items, size_t* train,
                                          size_t* test, int* height,
                                          int* width);
EMLAB_API void emlab_dataset_free(emlab_dataset* dataset);

/* ---- smoothing specs ------------------------------------------------- */

enum {
  EMLAB_COND_DEFAULT = 0,
  EMLAB_COND_COLOR = 1,
  EMLAB_COND_SCALE = 2,
  EMLAB_COND_SHAPE = 3,
  EMLAB_COND_ALL = 4,
  EMLAB_COND_MIXED = 5
};

typedef struct emlab_spec {
  int condition;
  double sigma;
  int pair[2];       /* EMLAB_COLOR/SCALE/SHAPE, mixed only */
  double weights[2]; /* mixed only */
} emlab_spec;

/* default, color, scale, shape, all, color-scale, color-shape, scale-shape */
EMLAB_API emlab_status emlab_spec_named(const char* name, emlab_spec* out);
EMLAB_API emlab_status emlab_spec_validate(const emlab_spec* spec);
/* Writes the spec name, truncated to capacity - 1 bytes. */
EMLAB_API emlab_status emlab_spec_name(const emlab_spec* spec, char* buffer,
                                       size_t capacity);
EMLAB_API emlab_status emlab_smoothed_target(const emlab_spec* spec,
                                             int class_id,
                                             double out[EMLAB_NUM_CLASSES]);

/* ---- vision modules -------------------------------------------------- */

enum { EMLAB_OPT_SGD = 0, EMLAB_OPT_ADAM = 1 };

typedef struct emlab_pretrain_config {
  int optimizer;
  double learning_rate;
  int batch_size;
  int epochs;
  int cosine_decay;
} emlab_pretrain_config;

/* preset: "paper" or "desk". */
EMLAB_API emlab_status emlab_pretrain_config_preset(
    const char* preset, emlab_pretrain_config* out);

typedef struct emlab_vision emlab_vision;

EMLAB_API emlab_status emlab_vision_create(int height, int width,
                                           uint64_t seed, emlab_vision** out);
EMLAB_API emlab_status emlab_vision_clone(const emlab_vision* vision,
                                          emlab_vision** out);
EMLAB_API emlab_status emlab_vision_pretrain(
    emlab_vision* vision, const emlab_dataset* dataset, const emlab_spec* spec,
    const emlab_pretrain_config* config, uint64_t seed,
    double* train_accuracy, double* test_accuracy);
EMLAB_API emlab_status emlab_vision_accuracy(emlab_vision* vision,
                                             const emlab_dataset* dataset,
                                             int split, double* accuracy);
EMLAB_API emlab_status emlab_vision_save(const emlab_vision* vision,
                                         const char* path);
EMLAB_API emlab_status emlab_vision_load(const char* path, int height,
                                         int width, emlab_vision** out);
EMLAB_API void emlab_vision_free(emlab_vision* vision);

/* ---- similarity analysis --------------------------------------------- */

typedef struct emlab_rsm emlab_rsm;

/* Undefined scores are NaN. */
typedef struct emlab_bias_profile {
  double overall;
  double color;
  double scale;
  double shape;
} emlab_bias_profile;

EMLAB_API emlab_status emlab_rsm_from_vision(emlab_vision* vision,
                                             const emlab_dataset* dataset,
                                             int per_class, uint64_t seed,
                                             emlab_rsm** out);
/* attribute -1 for the 3-hot template. */
EMLAB_API emlab_status emlab_rsm_template(int attribute, emlab_rsm** out);
EMLAB_API emlab_status emlab_rsm_at(const emlab_rsm* rsm, int i, int j,
                                    double* value);
EMLAB_API emlab_status emlab_rsm_profile(const emlab_rsm* rsm,
                                         emlab_bias_profile* out);
EMLAB_API emlab_status emlab_rsa(const emlab_rsm* a, const emlab_rsm* b,
                                 double* score);
EMLAB_API emlab_status emlab_rsm_write_csv(const emlab_rsm* rsm,
                                           const char* path);
EMLAB_API emlab_status emlab_rsm_write_pgm(const emlab_rsm* rsm,
                                           const char* path, int cell_pixels);
EMLAB_API void emlab_rsm_free(emlab_rsm* rsm);

/* ---- grid search ----------------------------------------------------- */

typedef struct emlab_grid_config {
  const double* sigmas; /* NULL for {0.6, 0.7, 0.8} */
  size_t n_sigmas;
  const double* first_weights; /* w1 values; NULL for 0.05..0.95 */
  size_t n_weights;
  emlab_pretrain_config pretrain;
  double accuracy_floor;
  int rsm_per_class;
  int budget;
  int workers;
} emlab_grid_config;

EMLAB_API emlab_status emlab_grid_config_default(const char* preset,
                                                 emlab_grid_config* out);
/* Writes the candidate table to csv_path (may be NULL) and the winner to
 * selected. Returns EMLAB_ERR_NO_CANDIDATE, after writing the table, when
 * nothing meets the accuracy floor. */
EMLAB_API emlab_status emlab_grid_search(const emlab_dataset* dataset,
                                         int first, int second,
                                         const emlab_grid_config* config,
                                         uint64_t seed, const char* csv_path,
                                         emlab_spec* selected,
                                         double* selected_accuracy);

/* ---- game and training configuration ---------------------------------- */

typedef struct emlab_game_config {
  int vocab_size;
  int message_length;
  int distractors;
  int relevant[3];
} emlab_game_config;

/* variant: all, color-irrelevant, scale-irrelevant, shape-irrelevant. */
EMLAB_API emlab_status emlab_game_config_variant(const char* variant,
                                                 emlab_game_config* out);
EMLAB_API emlab_status emlab_game_config_validate(
    const emlab_game_config* config);

enum {
  EMLAB_FROZEN_VISION = 0,
  EMLAB_LANGUAGE_LEARNING = 1,
  EMLAB_EMERGENCE_JOINT = 2,
  EMLAB_EMERGENCE_NO_CLASSIFICATION = 3
};

EMLAB_API emlab_status emlab_scenario_parse(const char* name, int* scenario);
EMLAB_API const char* emlab_scenario_name(int scenario);

typedef struct emlab_train_config {
  int scenario;
  double learning_rate;
  int batch_size;
  int epochs;
  double entropy_coef;
  int baseline;
  int eval_rounds;
} emlab_train_config;

/* preset: "paper" or "desk". population != 0 selects the population and
 * flexible epoch count. */
EMLAB_API emlab_status emlab_train_config_preset(const char* preset,
                                                 int scenario, int population,
                                                 emlab_train_config* out);

/* ---- agents and training --------------------------------------------- */

enum { EMLAB_SENDER = 0, EMLAB_RECEIVER = 1, EMLAB_FLEXIBLE = 2 };

typedef struct emlab_agent emlab_agent;
typedef struct emlab_train_log emlab_train_log;
typedef struct emlab_message_log emlab_message_log;

/* Copies the vision module. vision_spec gives the classification targets
 * used when the scenario trains vision. */
EMLAB_API emlab_status emlab_agent_create(int role, const emlab_vision* vision,
                                          const emlab_spec* vision_spec,
                                          int vocab_size, uint64_t seed,
                                          emlab_agent** out);
/* Copy of the agent's current vision module. */
EMLAB_API emlab_status emlab_agent_vision(const emlab_agent* agent,
                                          emlab_vision** out);
EMLAB_API emlab_status emlab_agent_save(const emlab_agent* agent,
                                        const char* path);
EMLAB_API emlab_status emlab_agent_load(const char* path, int role,
                                        int vocab_size, int height, int width,
                                        emlab_agent** out);
EMLAB_API void emlab_agent_free(emlab_agent* agent);

EMLAB_API emlab_status emlab_run_scenario(emlab_agent* sender,
                                          emlab_agent* receiver,
                                          const emlab_dataset* dataset,
                                          const emlab_game_config* game,
                                          const emlab_train_config* train,
                                          uint64_t seed, emlab_train_log** out);
EMLAB_API emlab_status emlab_run_population(
    emlab_agent* const* senders, size_t n_senders,
    emlab_agent* const* receivers, size_t n_receivers,
    const emlab_dataset* dataset, const emlab_game_config* game,
    const emlab_train_config* train, uint64_t seed, emlab_train_log** out);
EMLAB_API emlab_status emlab_run_flexible(emlab_agent* a, emlab_agent* b,
                                          const emlab_dataset* dataset,
                                          const emlab_game_config* game,
                                          const emlab_train_config* train,
                                          uint64_t seed, emlab_train_log** out);

/* swapped_reward is set to NaN for non-flexible runs. */
EMLAB_API emlab_status emlab_train_log_rewards(const emlab_train_log* log,
                                               double* test_reward,
                                               double* swapped_reward);
EMLAB_API emlab_status emlab_train_log_epochs(const emlab_train_log* log,
                                              size_t* epochs);
EMLAB_API emlab_status emlab_train_log_write_csv(const emlab_train_log* log,
                                                 const char* path);
/* swapped != 0 selects the role-swapped evaluation log. */
EMLAB_API emlab_status emlab_train_log_messages(const emlab_train_log* log,
                                                int swapped,
                                                emlab_message_log** out);
EMLAB_API void emlab_train_log_free(emlab_train_log* log);

EMLAB_API emlab_status emlab_evaluate(emlab_agent* sender,
                                      emlab_agent* receiver,
                                      const emlab_dataset* dataset,
                                      const emlab_game_config* game,
                                      int n_rounds, uint64_t seed,
                                      double* mean_reward,
                                      emlab_message_log** out);

/* ---- message logs ---------------------------------------------------- */

/* Entropies in bits. Undefined effectiveness scores are NaN. */
typedef struct emlab_log_info {
  size_t rounds;
  double mean_reward;
  double effectiveness;
  double effectiveness_color;
  double effectiveness_scale;
  double effectiveness_shape;
  double average_effectiveness;
  double h_o, h_m, h_s;
  double h_o_given_m, h_m_given_o, h_s_given_m;
  double i_om, i_sm, i_os;
  double i_os_given_m;
  double interaction;
  double h_o_given_ms, h_s_given_om;
} emlab_log_info;

EMLAB_API emlab_status emlab_message_log_read(const char* path, int vocab_size,
                                              emlab_message_log** out);
EMLAB_API emlab_status emlab_message_log_write(const emlab_message_log* log,
                                               const char* path);
EMLAB_API emlab_status emlab_message_log_info(const emlab_message_log* log,
                                              emlab_log_info* out);
EMLAB_API void emlab_message_log_free(emlab_message_log* log);

/* ---- bootstrap ------------------------------------------------------- */

typedef struct emlab_ci {
  double estimate;
  double lower;
  double upper;
  double level;
  int resamples;
} emlab_ci;

EMLAB_API emlab_status emlab_bootstrap_mean(const double* samples, size_t n,
                                            int resamples, double level,
                                            uint64_t seed, emlab_ci* out);
EMLAB_API emlab_status emlab_bootstrap_diff(const double* a, size_t n_a,
                                            const double* b, size_t n_b,
                                            int resamples, double level,
                                            uint64_t seed, emlab_ci* out);

/* ---- evolutionary analysis ------------------------------------------- */

typedef struct emlab_payoff emlab_payoff;

typedef void (*emlab_warning_fn)(const char* message, void* user_data);

/* Trains every ordered pair of types runs_per_pair times. visions[i] is the
 * pretrained module of type i and specs[i] its smoothing spec. */
EMLAB_API emlab_status emlab_tournament_run(
    const char* const* names, const emlab_vision* const* visions,
    const emlab_spec* specs, size_t n_types, const emlab_dataset* dataset,
    const emlab_game_config* game, const emlab_train_config* train,
    int runs_per_pair, int workers, uint64_t seed, emlab_warning_fn warn,
    void* user_data, emlab_payoff** out);
EMLAB_API emlab_status emlab_payoff_read(const char* path, emlab_payoff** out);
EMLAB_API emlab_status emlab_payoff_write(const emlab_payoff* payoff,
                                          const char* path);
EMLAB_API emlab_status emlab_payoff_size(const emlab_payoff* payoff,
                                         size_t* n_types);
EMLAB_API const char* emlab_payoff_type(const emlab_payoff* payoff, size_t i);
EMLAB_API emlab_status emlab_payoff_failures(const emlab_payoff* payoff,
                                             size_t* count);
/* Row-major n x n matrices. */
EMLAB_API emlab_status emlab_payoff_directed(const emlab_payoff* payoff,
                                             double* out);
EMLAB_API emlab_status emlab_payoff_symmetric(const emlab_payoff* payoff,
                                              double* out);
/* Symmetric matrix as CSV (type column plus one column per type) and as a
 * grayscale PGM heatmap (0 black, 1 white). Either path may be NULL. */
EMLAB_API emlab_status emlab_payoff_write_matrix(const emlab_payoff* payoff,
                                                 const char* csv_path,
                                                 const char* pgm_path,
                                                 int cell_pixels);

/* Pure-ESS flags of a row-major square matrix. Output arrays have n
 * entries; strict and tie_breaker may be NULL. */
EMLAB_API emlab_status emlab_find_pure_ess(const double* matrix, size_t n,
                                           double tolerance, int* is_ess,
                                           int* strict, int* tie_breaker);

/* ESS analysis of the symmetrized table with bootstrap column comparisons,
 * written as JSON to json_path (may be NULL). is_ess and significant may be
 * NULL or have n_types entries. */
EMLAB_API emlab_status emlab_ess_analyze(const emlab_payoff* payoff,
                                         int resamples, double level,
                                         uint64_t seed, const char* json_path,
                                         int* is_ess, int* significant);
EMLAB_API void emlab_payoff_free(emlab_payoff* payoff);

#ifdef __cplusplus
}  /* extern "C" */
#endif

#endif  /* EMERGELAB_EMERGELAB_H_ */
