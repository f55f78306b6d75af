#ifndef SNVC_H
#define SNVC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SnvcSpline {
  SNVC_SPLINE_NATURAL_CUBIC = 0,
  SNVC_SPLINE_THIN_PLATE = 1,
} SnvcSpline;

typedef enum SnvcStatus {
  SNVC_STATUS_OK = 0,
  SNVC_STATUS_NULL_POINTER = 1,
  SNVC_STATUS_INVALID_ARGUMENT = 2,
  SNVC_STATUS_DATA_ERROR = 3,
  SNVC_STATUS_NUMERICAL_ERROR = 4,
  SNVC_STATUS_BUFFER_TOO_SMALL = 5,
  SNVC_STATUS_PANIC = 6,
} SnvcStatus;

/**
 * Which additive part of the coefficient field to copy out.
 */
typedef enum SnvcCoefPart {
  SNVC_COEF_PART_MEAN = 0,
  SNVC_COEF_PART_SVC = 1,
  SNVC_COEF_PART_NVC = 2,
  SNVC_COEF_PART_TOTAL = 3,
} SnvcCoefPart;

/**
 * A fitted model with its coefficient fields.
 */
typedef struct SnvcFit SnvcFit;

/**
 * Moran eigenvector basis of a site set.
 */
typedef struct SnvcSpatialBasis SnvcSpatialBasis;

typedef struct SnvcFitOptions {
  /**
   * Spline basis size for every NVC term.
   */
  size_t n_basis;
  enum SnvcSpline spline;
  /**
   * Likelihood evaluation budget per optimizer start.
   */
  size_t max_evals;
} SnvcFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *snvc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *snvc_version(void);

struct SnvcFitOptions snvc_fit_options_default(void);

/**
 * Builds the Moran eigenvector basis for `n_sites` points given as
 * interleaved `x0, y0, x1, y1, ...`.
 *
 * # Safety
 * `coords` must point to `2 * n_sites` readable doubles and `out` to a writable handle slot.
 */
enum SnvcStatus snvc_spatial_basis_new(const double *coords,
                                       size_t n_sites,
                                       struct SnvcSpatialBasis **out);

/**
 * # Safety
 * `basis` must be null or a handle from [`snvc_spatial_basis_new`] not yet freed.
 */
void snvc_spatial_basis_free(struct SnvcSpatialBasis *basis);

/**
 * # Safety
 * `basis` must be a live handle; `n_sites`, `n_eigen` and `range` writable.
 */
enum SnvcStatus snvc_spatial_basis_info(const struct SnvcSpatialBasis *basis,
                                        size_t *n_sites,
                                        size_t *n_eigen,
                                        double *range);

/**
 * Copies the retained eigenvalues, largest first.
 *
 * # Safety
 * `basis` must be a live handle and `out` must hold `out_len` doubles.
 */
enum SnvcStatus snvc_spatial_basis_eigenvalues(const struct SnvcSpatialBasis *basis,
                                               double *out,
                                               size_t out_len);

/**
 * Copies the `n_sites x n_eigen` eigenvector matrix.
 *
 * # Safety
 * `basis` must be a live handle and `out` must hold `out_len` doubles.
 */
enum SnvcStatus snvc_spatial_basis_eigenvectors(const struct SnvcSpatialBasis *basis,
                                                double *out,
                                                size_t out_len);

/**
 * Moran coefficient of `z` under `exp(-d / r)` weights with `r` the longest
 * minimum spanning tree edge.
 *
 * # Safety
 * `coords` must hold `2 * n_sites` doubles, `z` `n_sites` doubles, `out` one writable double.
 */
enum SnvcStatus snvc_moran_coefficient(const double *coords,
                                       size_t n_sites,
                                       const double *z,
                                       double *out);

/**
 * Fits the model. `x` is `n_sites x n_covariates`; include a column of ones for
 * an intercept. `has_svc` and `has_nvc` hold one flag per covariate. `basis` may
 * be null when no flag in `has_svc` is set. `options` may be null for defaults.
 *
 * # Safety
 * `x` must hold `n_sites * n_covariates` doubles, `y` `n_sites` doubles, the flag
 * arrays `n_covariates` bytes each; `basis` and `options` must be null or valid;
 * `out` must be a writable handle slot.
 */
enum SnvcStatus snvc_fit(const struct SnvcSpatialBasis *basis,
                         const double *x,
                         const double *y,
                         size_t n_sites,
                         size_t n_covariates,
                         const uint8_t *has_svc,
                         const uint8_t *has_nvc,
                         const struct SnvcFitOptions *options,
                         struct SnvcFit **out);

/**
 * # Safety
 * `fit` must be null or a handle from [`snvc_fit`] not yet freed.
 */
void snvc_fit_free(struct SnvcFit *fit);

/**
 * Scalar results. `converged` is set to 1 or 0.
 *
 * # Safety
 * `fit` must be a live handle; every output pointer must be writable.
 */
enum SnvcStatus snvc_fit_summary(const struct SnvcFit *fit,
                                 size_t *n_sites,
                                 size_t *n_covariates,
                                 double *sigma2,
                                 double *restricted_loglik,
                                 uint8_t *converged);

/**
 * Variance parameters of covariate `k`.
 *
 * # Safety
 * `fit` must be a live handle; the three outputs must be writable.
 */
enum SnvcStatus snvc_fit_theta(const struct SnvcFit *fit,
                               size_t k,
                               double *tau2_svc,
                               double *alpha,
                               double *tau2_nvc);

/**
 * Copies the `n_covariates` fixed-effect estimates.
 *
 * # Safety
 * `fit` must be a live handle and `out` must hold `out_len` doubles.
 */
enum SnvcStatus snvc_fit_fixed_effects(const struct SnvcFit *fit, double *out, size_t out_len);

/**
 * Copies the share of the spatially varying part per covariate.
 *
 * # Safety
 * `fit` must be a live handle and `out` must hold `out_len` doubles.
 */
enum SnvcStatus snvc_fit_svc_shares(const struct SnvcFit *fit, double *out, size_t out_len);

/**
 * Copies one part of the coefficient field as an `n_sites x n_covariates` matrix.
 *
 * # Safety
 * `fit` must be a live handle and `out` must hold `out_len` doubles.
 */
enum SnvcStatus snvc_fit_coefficients(const struct SnvcFit *fit,
                                      enum SnvcCoefPart part,
                                      double *out,
                                      size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNVC_H */
