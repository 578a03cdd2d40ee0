#ifndef SRLAB_H
#define SRLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SrlabPolicy {
  SRLAB_POLICY_CONSERVATIVE = 0,
  SRLAB_POLICY_BASELINE = 1,
  SRLAB_POLICY_LEARNED = 2,
} SrlabPolicy;

typedef enum SrlabStatus {
  SRLAB_STATUS_OK = 0,
  SRLAB_STATUS_NULL_POINTER = 1,
  SRLAB_STATUS_INVALID_ARGUMENT = 2,
  SRLAB_STATUS_CONFIG = 3,
  SRLAB_STATUS_IO = 4,
  SRLAB_STATUS_MODEL = 5,
  SRLAB_STATUS_GOVERNOR = 6,
  SRLAB_STATUS_RUNTIME = 7,
  SRLAB_STATUS_PANIC = 8,
} SrlabStatus;

/**
 * Gains, safety metric, closed loop and mission built from a configuration.
 */
typedef struct SrlabDesign SrlabDesign;

/**
 * A trained step-size policy.
 */
typedef struct SrlabModel SrlabModel;

/**
 * Outcome of one mission. `failure` is 0 on success, then 1 unstable,
 * 2 recovery timeout, 3 cycle cap.
 */
typedef struct SrlabEpisodeSummary {
  bool success;
  int32_t failure;
  double mission_time;
  uint64_t cycles;
  double episode_return;
  double mean_alpha;
  double mean_mc_peak_est;
  double max_mc_est;
  double max_r_mpn;
} SrlabEpisodeSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *srlab_last_error(void);

/**
 * Builds the default design.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SrlabStatus srlab_design_new(struct SrlabDesign **out);

/**
 * Builds a design from TOML text (no environment overrides).
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` writable.
 */
enum SrlabStatus srlab_design_from_toml(const char *toml, struct SrlabDesign **out);

/**
 * # Safety
 * `design` must come from a design constructor and not be used afterwards.
 */
void srlab_design_free(struct SrlabDesign *design);

/**
 * # Safety
 * `design` must be a live handle and `out` writable.
 */
enum SrlabStatus srlab_design_conservative_alpha(const struct SrlabDesign *design, double *out);

/**
 * # Safety
 * `design` must be a live handle and `out` writable.
 */
enum SrlabStatus srlab_design_alpha_max(const struct SrlabDesign *design, double *out);

/**
 * `‖x − c‖²_P` under the design's safety metric. Both vectors have 12
 * entries.
 *
 * # Safety
 * `design` must be a live handle, `x` and `c` must point to 12 doubles and
 * `out` must be writable.
 */
enum SrlabStatus srlab_design_norm_sq(const struct SrlabDesign *design,
                                      const double *x,
                                      const double *c,
                                      double *out);

/**
 * Step size of the baseline governor for an estimate and setpoint.
 *
 * # Safety
 * `design` must be a live handle, `x_hat` and `x_sp` must point to 12
 * doubles and `out` must be writable.
 */
enum SrlabStatus srlab_baseline_alpha(const struct SrlabDesign *design,
                                      const double *x_hat,
                                      const double *x_sp,
                                      double *out);

/**
 * Loads a model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum SrlabStatus srlab_model_load(const char *path, struct SrlabModel **out);

/**
 * # Safety
 * `model` must come from [`srlab_model_load`] and not be used afterwards.
 */
void srlab_model_free(struct SrlabModel *model);

/**
 * Deterministic step size chosen by the model for the 12-entry state
 * `x̂ − x_sp`.
 *
 * # Safety
 * `model` must be a live handle, `state` must point to 12 doubles and `out`
 * must be writable.
 */
enum SrlabStatus srlab_model_alpha(const struct SrlabModel *model,
                                   const double *state,
                                   double *out);

/**
 * Flies one mission with the chosen policy. `model` is required for
 * [`SrlabPolicy::Learned`] and ignored otherwise. When `trace_path` is not
 * null the full trace is written there as CSV.
 *
 * # Safety
 * `design` must be a live handle, `model` null or live, `trace_path` null
 * or NUL-terminated and `out` writable.
 */
enum SrlabStatus srlab_run_episode(const struct SrlabDesign *design,
                                   enum SrlabPolicy policy,
                                   const struct SrlabModel *model,
                                   uint64_t seed,
                                   const char *trace_path,
                                   struct SrlabEpisodeSummary *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *srlab_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SRLAB_H */
