#ifndef SHIFTBAND_H
#define SHIFTBAND_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum ShiftbandStatus {
  SHIFTBAND_STATUS_OK = 0,
  SHIFTBAND_STATUS_NULL_POINTER = 1,
  SHIFTBAND_STATUS_INVALID_UTF8 = 2,
  SHIFTBAND_STATUS_CONFIG = 3,
  SHIFTBAND_STATUS_RANGE = 4,
  SHIFTBAND_STATUS_VALIDATION = 5,
  SHIFTBAND_STATUS_RESOURCE = 6,
  SHIFTBAND_STATUS_USAGE = 7,
  SHIFTBAND_STATUS_END_OF_HORIZON = 8,
  SHIFTBAND_STATUS_NUMERIC = 9,
  SHIFTBAND_STATUS_IO = 10,
  SHIFTBAND_STATUS_INTERNAL = 11,
  SHIFTBAND_STATUS_PANIC = 12,
} ShiftbandStatus;

// An expanded reward environment.
typedef struct ShiftbandModel ShiftbandModel;

// A running policy.
typedef struct ShiftbandPolicy ShiftbandPolicy;

// A seeded reward-noise stream.
typedef struct ShiftbandRng ShiftbandRng;

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into this library from the same thread.
const char *shiftband_last_error(void);

// Library version as a static NUL-terminated string.
const char *shiftband_version(void);

// # Safety
// `s` must be NULL or a string returned by this library and not yet freed.
void shiftband_string_free(char *s);

// Expand an environment spec (JSON) into a model.
//
// # Safety
// `spec_json` must be a NUL-terminated string; `out` must be writable.
enum ShiftbandStatus shiftband_model_from_json(const char *spec_json, struct ShiftbandModel **out);

// # Safety
// `model` must be NULL or a handle from [`shiftband_model_from_json`].
void shiftband_model_free(struct ShiftbandModel *model);

// Horizon `T`, or 0 for a NULL handle.
//
// # Safety
// `model` must be NULL or a live handle.
size_t shiftband_model_horizon(const struct ShiftbandModel *model);

// Number of arms `K`, or 0 for a NULL handle.
//
// # Safety
// `model` must be NULL or a live handle.
size_t shiftband_model_num_arms(const struct ShiftbandModel *model);

// True mean of `arm` (0-based) at round `t` (1-based).
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum ShiftbandStatus shiftband_model_mean(const struct ShiftbandModel *model,
                                          size_t t,
                                          size_t arm,
                                          double *out);

// Reward-noise stream for `(seed, trial)`.
struct ShiftbandRng *shiftband_rng_new(uint64_t seed, uint64_t trial);

// # Safety
// `rng` must be NULL or a handle from [`shiftband_rng_new`].
void shiftband_rng_free(struct ShiftbandRng *rng);

// Draw a reward for `arm` at round `t`.
//
// # Safety
// Handles must be live; `out` must be writable.
enum ShiftbandStatus shiftband_model_sample(const struct ShiftbandModel *model,
                                            size_t t,
                                            size_t arm,
                                            struct ShiftbandRng *rng,
                                            double *out);

// Ground-truth report as JSON. Horizons above `round_cap` fail with
// `Resource`.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum ShiftbandStatus shiftband_ground_truth_json(const struct ShiftbandModel *model,
                                                 size_t round_cap,
                                                 char **out);

// Build a policy for `model` from a policy spec (JSON, e.g.
// `{"name": "meta"}`). Policies that need ground truth compute it here.
//
// # Safety
// `model` must be a live handle, `policy_json` a NUL-terminated string and
// `out` writable. The policy does not borrow the model.
enum ShiftbandStatus shiftband_policy_new(const struct ShiftbandModel *model,
                                          const char *policy_json,
                                          uint64_t seed,
                                          struct ShiftbandPolicy **out);

// # Safety
// `policy` must be NULL or a handle from [`shiftband_policy_new`].
void shiftband_policy_free(struct ShiftbandPolicy *policy);

// Choose the arm for the next round.
//
// # Safety
// `policy` must be a live handle; `out_arm` must be writable.
enum ShiftbandStatus shiftband_policy_select(struct ShiftbandPolicy *policy, size_t *out_arm);

// Report the reward of the arm returned by the last select.
//
// # Safety
// `policy` must be a live handle.
enum ShiftbandStatus shiftband_policy_observe(struct ShiftbandPolicy *policy,
                                              size_t arm,
                                              double reward);

// Run an experiment config (JSON) and return the summary as JSON. Output
// paths in the config are ignored.
//
// # Safety
// `config_json` must be a NUL-terminated string; `out` must be writable.
enum ShiftbandStatus shiftband_run_experiment_json(const char *config_json,
                                                   uint64_t seed_offset,
                                                   char **out);

#endif  /* SHIFTBAND_H */
