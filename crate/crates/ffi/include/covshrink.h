#ifndef COVSHRINK_H
#define COVSHRINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_DIMENSION_MISMATCH = 2,
  CS_STATUS_INVALID_ARGUMENT = 3,
  CS_STATUS_OUT_OF_RANGE = 4,
  CS_STATUS_NOT_POSITIVE_SEMIDEFINITE = 5,
  CS_STATUS_NON_FINITE = 6,
  CS_STATUS_IO = 7,
  CS_STATUS_PANIC = 8,
} CsStatus;

/**
 * Estimator selector for [`cs_estimate`].
 */
typedef enum CsTarget {
  CS_TARGET_SAMPLE = 0,
  CS_TARGET_TAPER = 1,
  CS_TARGET_TOEPLITZ = 2,
} CsTarget;

/**
 * A symmetric `d × d` matrix.
 */
typedef struct CsMatrix CsMatrix;

/**
 * A `n × d` time series.
 */
typedef struct CsSample CsSample;

/**
 * Bandwidths and rate parameters of the tapered and Toeplitz estimators.
 */
typedef struct CsThresholds {
  double tau_dagger;
  double tau_diamond;
  double sigma_dagger;
  double alpha;
  double c_exponent;
  double s_exponent;
} CsThresholds;

/**
 * Plug-in risk estimates of the shrinkage objective.
 */
typedef struct CsRisk {
  double mse;
  double e_dagger;
  double e_diamond;
  double d_cross;
} CsRisk;

/**
 * Bootstrap settings. `block_len = 0` selects `⌈5n^0.2⌉`.
 */
typedef struct CsBootstrap {
  size_t block_len;
  size_t n_boot;
  double level;
  double delta_exponent;
  uint64_t seed;
} CsBootstrap;

typedef struct CsTestResult {
  double statistic;
  double quantile;
  double delta;
  bool reject;
  size_t argmax_k;
  size_t block_len;
} CsTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cs_last_error(void);

/**
 * Copies `n × d` row-major values into a new sample.
 *
 * # Safety
 * `data` must point to `n * d` readable doubles; `out` must be writable.
 */
enum CsStatus cs_sample_new(const double *data, size_t n, size_t d, struct CsSample **out);

/**
 * # Safety
 * `sample` must be NULL or a handle from this library that has not been freed.
 */
void cs_sample_free(struct CsSample *sample);

/**
 * # Safety
 * `sample` must be a live handle; `n` and `d` must be writable.
 */
enum CsStatus cs_sample_shape(const struct CsSample *sample, size_t *n, size_t *d);

/**
 * Simulates Model A. `change_at = 0` means no break.
 *
 * # Safety
 * `out` must be writable.
 */
enum CsStatus cs_simulate_model_a(size_t n,
                                  size_t d,
                                  double b_post,
                                  size_t change_at,
                                  uint64_t seed,
                                  struct CsSample **out);

/**
 * Simulates Model B (`sqrt_spacing = false`) or Model C (`true`) under the null.
 *
 * # Safety
 * `out` must be writable.
 */
enum CsStatus cs_simulate_model_bc(size_t n,
                                   size_t d,
                                   double hurst,
                                   bool sqrt_spacing,
                                   uint64_t seed,
                                   struct CsSample **out);

/**
 * Default thresholds; `theorem_rates` selects `c = 2` instead of `c = 1`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CsStatus cs_default_thresholds(size_t n,
                                    size_t d,
                                    double alpha,
                                    double s_exponent,
                                    bool theorem_rates,
                                    struct CsThresholds *out);

/**
 * `(1/n) Σ xₜxₜᵀ` over the whole sample.
 *
 * # Safety
 * `sample` must be a live handle; `out` must be writable.
 */
enum CsStatus cs_sample_cov(const struct CsSample *sample, struct CsMatrix **out);

/**
 * Tapered or Toeplitz estimate from a sample covariance.
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum CsStatus cs_estimate(const struct CsMatrix *s,
                          enum CsTarget target,
                          double tau,
                          struct CsMatrix **out);

/**
 * `w₁S + w₂T + w₃Z`.
 *
 * # Safety
 * `w` must point to 3 doubles; the matrices must be live handles; `out` must be writable.
 */
enum CsStatus cs_shrink_combine(const double *w,
                                const struct CsMatrix *sample,
                                const struct CsMatrix *tapered,
                                const struct CsMatrix *toeplitz,
                                struct CsMatrix **out);

/**
 * # Safety
 * `m` must be NULL or a handle from this library that has not been freed.
 */
void cs_matrix_free(struct CsMatrix *m);

/**
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum CsStatus cs_matrix_dim(const struct CsMatrix *m, size_t *out);

/**
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum CsStatus cs_matrix_get(const struct CsMatrix *m, size_t i, size_t j, double *out);

/**
 * Copies the matrix row-major into `buf`, which must hold `len ≥ d²` doubles.
 *
 * # Safety
 * `m` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum CsStatus cs_matrix_copy(const struct CsMatrix *m, double *buf, size_t len);

/**
 * Plug-in risk estimates. `bandwidth ≤ 0` selects Newey–West per component.
 *
 * # Safety
 * `sample` and `thresholds` must be valid; `out` must be writable.
 */
enum CsStatus cs_risk_components(const struct CsSample *sample,
                                 const struct CsThresholds *thresholds,
                                 double bandwidth,
                                 struct CsRisk *out);

/**
 * Minimizer of the shrinkage objective over the simplex, written to `w_out[0..3]`.
 *
 * # Safety
 * `risk` must be valid; `w_out` must point to 3 writable doubles.
 */
enum CsStatus cs_optimal_weights(const struct CsRisk *risk, double *w_out);

/**
 * CUSUM statistic `Tₙ(w)` and its maximizing `k` for projection `v` (length `d`).
 *
 * # Safety
 * `sample` and `thresholds` must be valid; `v` must point to `d` doubles and
 * `w` to 3; `stat` and `argmax_k` must be writable.
 */
enum CsStatus cs_cusum_stat(const struct CsSample *sample,
                            const double *v,
                            const double *w,
                            const struct CsThresholds *thresholds,
                            double *stat,
                            size_t *argmax_k);

/**
 * Bootstrap CUSUM test at a single weight `w`.
 *
 * # Safety
 * As for [`cs_cusum_stat`]; `cfg` must be valid and `out` writable.
 */
enum CsStatus cs_changepoint_test(const struct CsSample *sample,
                                  const double *v,
                                  const double *w,
                                  const struct CsThresholds *thresholds,
                                  const struct CsBootstrap *cfg,
                                  struct CsTestResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COVSHRINK_H */
