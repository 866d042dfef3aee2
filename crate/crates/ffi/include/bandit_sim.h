#ifndef BANDIT_SIM_H
#define BANDIT_SIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum BsStatus {
  BS_STATUS_OK = 0,
  BS_STATUS_NULL_POINTER = 1,
  BS_STATUS_INVALID_ARGUMENT = 2,
  BS_STATUS_CONFIG = 3,
  BS_STATUS_SIMULATION = 4,
  BS_STATUS_IO = 5,
  BS_STATUS_PANIC = 6,
} BsStatus;

// Opaque round generator.
typedef struct BsEnvironment BsEnvironment;

// Opaque bandit policy with its own exploration stream.
typedef struct BsPolicy BsPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if the last call
// succeeded. The pointer stays valid until the next call on the same thread.
const char *bs_last_error_message(void);

// Creates an environment with randomly drawn coefficients.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum BsStatus bs_environment_new(size_t n_actions,
                                 size_t dim_context,
                                 uint64_t seed,
                                 struct BsEnvironment **out);

// Releases an environment. Null is ignored.
//
// # Safety
// `env` must be null or a handle from [`bs_environment_new`] not yet freed.
void bs_environment_free(struct BsEnvironment *env);

// Draws the next round. `context` receives `dim_context` values;
// `expected_rewards` and `rewards` receive `n_actions` values each. Any of
// the three output buffers may be null to skip it.
//
// # Safety
// `env` must be a live handle; non-null buffers must hold the lengths given.
enum BsStatus bs_environment_sample(struct BsEnvironment *env,
                                    double *context,
                                    size_t dim_context,
                                    double *expected_rewards,
                                    uint8_t *rewards,
                                    size_t n_actions,
                                    uint64_t *round_index);

// Creates a policy by name (`random`, `egreedy`, `bts`, `linucb`, `lints`)
// with default hyperparameters.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum BsStatus bs_policy_new(const char *name,
                            size_t n_actions,
                            size_t dim_context,
                            uint64_t seed,
                            struct BsPolicy **out);

// Releases a policy. Null is ignored.
//
// # Safety
// `policy` must be null or a handle from [`bs_policy_new`] not yet freed.
void bs_policy_free(struct BsPolicy *policy);

// Picks an arm for `context`. `propensity` may be null.
//
// # Safety
// `policy` must be a live handle and `context` must hold `dim_context` values.
enum BsStatus bs_policy_select(struct BsPolicy *policy,
                               const double *context,
                               size_t dim_context,
                               size_t *action,
                               double *propensity);

// Feeds one observed binary reward back to the policy.
//
// # Safety
// `policy` must be a live handle and `context` must hold `dim_context` values.
enum BsStatus bs_policy_update(struct BsPolicy *policy,
                               const double *context,
                               size_t dim_context,
                               size_t action,
                               uint8_t reward);

// Runs the experiment described by the TOML file at `config_path` and writes
// its CSV files. `output_dir` overrides the configured directory when
// non-null. Progress output is suppressed.
//
// # Safety
// Both strings must be NUL-terminated (or `output_dir` null).
enum BsStatus bs_run_experiment(const char *config_path, const char *output_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BANDIT_SIM_H */
