#ifndef DIFFTD_H
#define DIFFTD_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DifftdStatus {
  DIFFTD_STATUS_OK = 0,
  DIFFTD_STATUS_NULL_POINTER = 1,
  // Bad string encoding, wrong buffer length or a value outside its domain.
  DIFFTD_STATUS_INVALID_ARGUMENT = 2,
  DIFFTD_STATUS_CONFIG = 3,
  DIFFTD_STATUS_INSUFFICIENT_RANK = 4,
  // The estimator or the simulated chain left the finite range.
  DIFFTD_STATUS_DIVERGENCE = 5,
  DIFFTD_STATUS_IO = 6,
  DIFFTD_STATUS_PANIC = 7,
} DifftdStatus;

// Key/value experiment configuration.
typedef struct DifftdConfig DifftdConfig;

// Online estimator bound to a model, fed one transition at a time.
typedef struct DifftdEstimator DifftdEstimator;

// Replica table of a finished experiment.
typedef struct DifftdResult DifftdResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *difftd_last_error(void);

// Library version as a static nul-terminated string.
const char *difftd_version(void);

// Empty configuration; never null.
struct DifftdConfig *difftd_config_new(void);

// # Safety
// `cfg` must come from [`difftd_config_new`] and not be freed yet.
void difftd_config_free(struct DifftdConfig *cfg);

// Sets one key, e.g. `"algorithm.alpha"` to `"0.9"`. Unknown keys are a
// `Config` error.
//
// # Safety
// `cfg` must be a live handle; `key` and `value` nul-terminated strings.
enum DifftdStatus difftd_config_set(struct DifftdConfig *cfg, const char *key, const char *value);

// Merges a TOML file; keys already set are overwritten.
//
// # Safety
// `cfg` must be a live handle; `path` a nul-terminated string.
enum DifftdStatus difftd_config_load(struct DifftdConfig *cfg, const char *path);

// Validates the configuration without running anything.
//
// # Safety
// `cfg` must be a live handle.
enum DifftdStatus difftd_config_validate(const struct DifftdConfig *cfg);

// Runs every replica. Worker count follows `DIFFTD_WORKERS`.
//
// # Safety
// `cfg` must be a live handle and `out` writable. `*out` is set to null on
// failure.
enum DifftdStatus difftd_run(const struct DifftdConfig *cfg, struct DifftdResult **out);

// # Safety
// `res` must come from [`difftd_run`] and not be freed yet.
void difftd_result_free(struct DifftdResult *res);

// Length of θ; 0 for a null handle.
//
// # Safety
// `res` must be a live handle or null.
size_t difftd_result_param_len(const struct DifftdResult *res);

// Last reporting time; 0 for a null handle.
//
// # Safety
// `res` must be a live handle or null.
uint64_t difftd_result_horizon(const struct DifftdResult *res);

// Mean θ over the usable replicas at time `t`. `included` (optional)
// receives the number of replicas averaged.
//
// # Safety
// `res` must be a live handle and `theta` hold `len` doubles.
enum DifftdStatus difftd_result_mean_theta(const struct DifftdResult *res,
                                           uint64_t t,
                                           double *theta,
                                           size_t len,
                                           size_t *included);

// Writes `replicas.csv`, the histograms and `summary.json` into `dir`.
//
// # Safety
// `res` must be a live handle; `dir` a nul-terminated string.
enum DifftdStatus difftd_result_write(const struct DifftdResult *res, const char *dir);

// Streaming estimator for a discrete-time configuration. The internal chain
// starts from `run.x0`, seeded as replica 0, and is burnt in by
// `run.burn_in` steps, so advancing it `run.T` steps reproduces replica 0
// of [`difftd_run`].
//
// # Safety
// `cfg` must be a live handle and `out` writable.
enum DifftdStatus difftd_estimator_new(const struct DifftdConfig *cfg,
                                       struct DifftdEstimator **out);

// # Safety
// `est` must come from [`difftd_estimator_new`] and not be freed yet.
void difftd_estimator_free(struct DifftdEstimator *est);

// Simulates `n` transitions of the internal chain and feeds each one in.
//
// # Safety
// `est` must be a live handle.
enum DifftdStatus difftd_estimator_advance(struct DifftdEstimator *est, uint64_t n);

// Feeds one externally observed transition: from state `x` under noise
// `noise`. The internal chain is not moved.
//
// # Safety
// `est` must be a live handle; `x` and `noise` hold `x_len` and `noise_len`
// doubles.
enum DifftdStatus difftd_estimator_push(struct DifftdEstimator *est,
                                        const double *x,
                                        size_t x_len,
                                        const double *noise,
                                        size_t noise_len);

// Transitions consumed so far; 0 for a null handle.
//
// # Safety
// `est` must be a live handle or null.
uint64_t difftd_estimator_steps(const struct DifftdEstimator *est);

// Length of θ; 0 for a null handle.
//
// # Safety
// `est` must be a live handle or null.
size_t difftd_estimator_param_len(const struct DifftdEstimator *est);

// Current fit `h(x) = θᵀψ(x) + κ` and average cost. `kappa` and `cbar` are
// optional.
//
// # Safety
// `est` must be a live handle and `theta` hold `len` doubles.
enum DifftdStatus difftd_estimator_fit(const struct DifftdEstimator *est,
                                       double *theta,
                                       size_t len,
                                       double *kappa,
                                       double *cbar);

// Discounted value `θ x² + κ` of the AR(1) chain `X' = aX + N` with cost x².
//
// # Safety
// `theta` and `kappa` must be writable.
enum DifftdStatus difftd_oracle_ar1(double a, double alpha, double *theta, double *kappa);

// Derivative at `x` of the discounted OU value function with cost x².
//
// # Safety
// `out` must be writable.
enum DifftdStatus difftd_oracle_ou(double beta, double gamma, double x, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIFFTD_H */
