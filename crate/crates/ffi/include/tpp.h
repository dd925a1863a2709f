/* C interface to the tpp temporal point process toolkit. */

#ifndef TPP_H
#define TPP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum TppStatus {
  TppStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  TppStatus_NullPointer = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  TppStatus_Utf8 = 2,
  /**
   * File system failure.
   */
  TppStatus_Io = 3,
  /**
   * A file exists but cannot be understood (CSV, manifest, version).
   */
  TppStatus_Parse = 4,
  /**
   * Model and data disagree (type counts, horizons).
   */
  TppStatus_Incompatible = 5,
  /**
   * Invalid argument or numerically inadmissible configuration.
   */
  TppStatus_Domain = 6,
  /**
   * Unexpected internal failure.
   */
  TppStatus_Internal = 7,
} TppStatus;

/**
 * Fit hyperparameters; obtain defaults from [`tpp_fit_options_default`].
 */
typedef struct TppFitOptions {
  uint32_t epochs;
  uint32_t batch_size;
  double learning_rate;
  /**
   * Per-epoch learning-rate decay in (0, 1].
   */
  double lr_decay;
  double l1_weight;
  double l2_weight;
  /**
   * History window length attached to each training sample.
   */
  uint32_t memory_size;
  uint64_t seed;
  /**
   * Fraction of sequences held out for validation, in [0, 1).
   */
  double validation_fraction;
} TppFitOptions;

/**
 * Opaque corpus handle.
 */
typedef struct TppDatabase {
  uint8_t _opaque[0];
} TppDatabase;

/**
 * Opaque model handle.
 */
typedef struct TppModel {
  uint8_t _opaque[0];
} TppModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *tpp_version(void);

/**
 * Message of the last failure on this thread; valid until the next failing
 * call on the same thread. Do not free.
 */
const char *tpp_last_error_message(void);

struct TppFitOptions tpp_fit_options_default(void);

/**
 * Load an event-sequence CSV (header row required) into a corpus handle.
 *
 * # Safety
 * String arguments must be valid NUL-terminated pointers; `out` must point
 * to writable storage for one pointer.
 */
enum TppStatus tpp_database_load_csv(const char *path,
                                     const char *seq_col,
                                     const char *time_col,
                                     const char *event_col,
                                     struct TppDatabase **out);

/**
 * # Safety
 * `db` must be a pointer from `tpp_database_load_csv`, not yet freed.
 */
void tpp_database_free(struct TppDatabase *db);

/**
 * Number of event types, or 0 for a null handle.
 *
 * # Safety
 * `db` must be null or a live corpus handle.
 */
uint64_t tpp_database_num_types(const struct TppDatabase *db);

/**
 * # Safety
 * `db` must be null or a live corpus handle.
 */
uint64_t tpp_database_num_sequences(const struct TppDatabase *db);

/**
 * # Safety
 * `db` must be null or a live corpus handle.
 */
uint64_t tpp_database_num_events(const struct TppDatabase *db);

/**
 * Build a named preset against the corpus and fit it.
 *
 * Preset names: linear-hawkes-exp, linear-hawkes-multigauss-mle,
 * linear-hawkes-multigauss-lse, factorized-pp, semi-parametric-hawkes,
 * self-correcting, mutually-correcting.
 *
 * # Safety
 * `db` must be a live corpus handle; `preset` a NUL-terminated string;
 * `opts` null (defaults) or valid; `out` writable.
 */
enum TppStatus tpp_model_fit_preset(const struct TppDatabase *db,
                                    const char *preset,
                                    const struct TppFitOptions *opts,
                                    struct TppModel **out);

/**
 * Read a model manifest from disk.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` writable.
 */
enum TppStatus tpp_model_load(const char *path, struct TppModel **out);

/**
 * Write the model manifest to disk.
 *
 * # Safety
 * `model` must be a live model handle; `path` NUL-terminated.
 */
enum TppStatus tpp_model_save(const struct TppModel *model, const char *path);

/**
 * # Safety
 * `model` must be a pointer from a `tpp_model_*` constructor, not yet freed.
 */
void tpp_model_free(struct TppModel *model);

/**
 * # Safety
 * `model` must be null or a live model handle.
 */
uint64_t tpp_model_num_types(const struct TppModel *model);

/**
 * Copy the C×C Granger-causality (infectivity) matrix, row-major, into a
 * caller buffer of exactly `len` = C·C doubles.
 *
 * # Safety
 * `model` must be a live handle; `out` must point to `len` writable doubles.
 */
enum TppStatus tpp_model_infectivity(const struct TppModel *model, double *out, uint64_t len);

/**
 * Copy the per-type exogenous intensity into a caller buffer of `len` = C.
 *
 * # Safety
 * `model` must be a live handle; `out` must point to `len` writable doubles.
 */
enum TppStatus tpp_model_exogenous(const struct TppModel *model, double *out, uint64_t len);

/**
 * Simulate one sequence over `(t_begin, t_end]` by thinning. On success the
 * event times and type indices are returned through freshly allocated
 * buffers of length `*out_len`; release both with the buffer-free calls.
 *
 * # Safety
 * `model` must be a live handle; out-pointers must be writable.
 */
enum TppStatus tpp_model_simulate(const struct TppModel *model,
                                  double t_begin,
                                  double t_end,
                                  uint64_t max_events,
                                  uint64_t seed,
                                  double **out_times,
                                  uint32_t **out_types,
                                  uint64_t *out_len);

/**
 * Average per-event loss of the model on a corpus (no updates). `loss` is
 * "mle", "lse", or "crossentropy"; null means the loss the model was
 * trained with.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum TppStatus tpp_model_validate(const struct TppModel *model,
                                  const struct TppDatabase *db,
                                  const char *loss,
                                  double *out);

/**
 * Release a double buffer returned by this library.
 *
 * # Safety
 * `ptr`/`len` must come from one successful `tpp_model_simulate` call.
 */
void tpp_buffer_free_f64(double *ptr, uint64_t len);

/**
 * Release a u32 buffer returned by this library.
 *
 * # Safety
 * `ptr`/`len` must come from one successful `tpp_model_simulate` call.
 */
void tpp_buffer_free_u32(uint32_t *ptr, uint64_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TPP_H */
