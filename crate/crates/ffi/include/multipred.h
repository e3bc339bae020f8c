#ifndef MULTIPRED_H
#define MULTIPRED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MpStatus {
  MP_STATUS_OK = 0,
  MP_STATUS_NULL_POINTER = 1,
  MP_STATUS_INVALID_UTF8 = 2,
  MP_STATUS_INVALID_CONFIG = 3,
  MP_STATUS_UNKNOWN_COMPONENT = 4,
  MP_STATUS_OUT_OF_RANGE = 5,
  MP_STATUS_IO = 6,
  MP_STATUS_NUMERIC = 7,
  MP_STATUS_PANIC = 8,
} MpStatus;

/**
 * An experiment configuration.
 */
typedef struct MpConfig MpConfig;

/**
 * A steppable environment with its own random stream.
 */
typedef struct MpEnv MpEnv;

/**
 * The evaluation log of one run.
 */
typedef struct MpRunLog MpRunLog;

/**
 * Result of [`mp_env_step`].
 */
typedef struct MpStep {
  /**
   * Next state coordinates.
   */
  double x;
  double y;
  /**
   * Goal entered on this step, or -1.
   */
  int32_t goal;
  /**
   * Zero on goal entry, one otherwise.
   */
  double behavior_discount;
} MpStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *mp_last_error(void);

/**
 * Library version as a static string.
 */
const char *mp_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void mp_string_free(char *s);

/**
 * Parses a JSON configuration.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum MpStatus mp_config_from_json(const char *json, struct MpConfig **out);

/**
 * Builds one of the named standard configurations.
 *
 * # Safety
 * `name` must be a nul-terminated string; `out` must be writable.
 */
enum MpStatus mp_config_from_preset(const char *name, struct MpConfig **out);

/**
 * Overrides the run length.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum MpStatus mp_config_set_steps(struct MpConfig *cfg, size_t steps);

/**
 * Serializes the configuration to JSON.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum MpStatus mp_config_to_json(const struct MpConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be null or a live handle, which becomes invalid.
 */
void mp_config_free(struct MpConfig *cfg);

/**
 * Runs the experiment with `seed`. Writes log files too when the
 * configuration names an output directory.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum MpStatus mp_run(const struct MpConfig *cfg, uint64_t seed, struct MpRunLog **out);

/**
 * # Safety
 * `log` must be null or a live handle, which becomes invalid.
 */
void mp_runlog_free(struct MpRunLog *log);

/**
 * Number of evaluation rows, or 0 for a null handle.
 *
 * # Safety
 * `log` must be null or a live handle.
 */
size_t mp_runlog_rows(const struct MpRunLog *log);

/**
 * # Safety
 * `log` must be null or a live handle.
 */
size_t mp_runlog_num_gvfs(const struct MpRunLog *log);

/**
 * # Safety
 * `log` must be null or a live handle.
 */
size_t mp_runlog_num_goals(const struct MpRunLog *log);

/**
 * Step, total error so far and mean intrinsic reward of row `r`.
 *
 * # Safety
 * `log` must be a live handle; out-pointers must be writable.
 */
enum MpStatus mp_runlog_row(const struct MpRunLog *log,
                            size_t r,
                            uint64_t *step,
                            double *te,
                            double *mean_reward);

/**
 * RMSVE of GVF `gvf` at row `r`.
 *
 * # Safety
 * `log` must be a live handle; `out` must be writable.
 */
enum MpStatus mp_runlog_rmsve(const struct MpRunLog *log, size_t r, size_t gvf, double *out);

/**
 * Cumulative entries into goal `goal` at row `r`.
 *
 * # Safety
 * `log` must be a live handle; `out` must be writable.
 */
enum MpStatus mp_runlog_visits(const struct MpRunLog *log, size_t r, size_t goal, uint64_t *out);

/**
 * The log in its CSV form.
 *
 * # Safety
 * `log` must be a live handle; `out` must be writable.
 */
enum MpStatus mp_runlog_to_csv(const struct MpRunLog *log, char **out);

/**
 * Runs one verification suite (`value-bound`, `rls-rate`,
 * `lstd-equivalence-1`, `-2` or `-3`) and returns its JSON report and
 * verdict.
 *
 * # Safety
 * `check` must be a nul-terminated string; out-pointers must be writable.
 */
enum MpStatus mp_oracle_check(const char *check,
                              size_t trials,
                              uint64_t seed,
                              char **report,
                              bool *passed);

/**
 * Creates environment `id` (as listed by `multipred list`) with its GVF
 * suite, seeded by `seed`, and draws a start state. Mountain Car
 * scripts its GVF policies here, which takes a few seconds.
 *
 * # Safety
 * `id` must be a nul-terminated string; `out` must be writable.
 */
enum MpStatus mp_env_new(const char *id, uint64_t seed, struct MpEnv **out);

/**
 * # Safety
 * `env` must be null or a live handle, which becomes invalid.
 */
void mp_env_free(struct MpEnv *env);

/**
 * Number of actions, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t mp_env_num_actions(const struct MpEnv *env);

/**
 * Current state coordinates.
 *
 * # Safety
 * `env` must be a live handle; out-pointers must be writable.
 */
enum MpStatus mp_env_state(const struct MpEnv *env, double *x, double *y);

/**
 * Takes `action` from the current state.
 *
 * # Safety
 * `env` must be a live handle; `out` must be writable.
 */
enum MpStatus mp_env_step(struct MpEnv *env, size_t action, struct MpStep *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MULTIPRED_H */
