/* Generated by cbindgen. Do not edit. */

#ifndef HDCOV_H
#define HDCOV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum HdcovStatus {
  HDCOV_STATUS_OK = 0,
  HDCOV_STATUS_NULL_POINTER = 1,
  HDCOV_STATUS_INVALID_INPUT = 2,
  HDCOV_STATUS_DIMENSION_MISMATCH = 3,
  HDCOV_STATUS_NOT_SYMMETRIC = 4,
  HDCOV_STATUS_NON_FINITE = 5,
  HDCOV_STATUS_SINGULAR = 6,
  HDCOV_STATUS_NOT_CONVERGED = 7,
  HDCOV_STATUS_BUFFER_TOO_SMALL = 8,
  HDCOV_STATUS_PANIC = 9,
} HdcovStatus;

/**
 * Opaque dense matrix.
 */
typedef struct HdcovMatrix HdcovMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hdcov_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL,
 * or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t hdcov_last_error_message(char *buf, size_t len);

/**
 * Builds a `rows × cols` matrix from a row-major buffer.
 *
 * # Safety
 * `values` must be valid for `rows * cols` reads; `out` must be writable.
 */
enum HdcovStatus hdcov_matrix_new(size_t rows,
                                  size_t cols,
                                  const double *values,
                                  struct HdcovMatrix **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `m` must be null or a handle from this library not yet freed.
 */
void hdcov_matrix_free(struct HdcovMatrix *m);

/**
 * # Safety
 * `m` must be a live handle; `rows` and `cols` must be writable.
 */
enum HdcovStatus hdcov_matrix_shape(const struct HdcovMatrix *m, size_t *rows, size_t *cols);

/**
 * Copies the entries in row-major order into `buf`, which holds `len`
 * values.
 *
 * # Safety
 * `m` must be a live handle; `buf` must be valid for `len` writes.
 */
enum HdcovStatus hdcov_matrix_copy(const struct HdcovMatrix *m, double *buf, size_t len);

/**
 * Sample covariance of `n × p` data; divisor `n − 1` when `unbiased`,
 * else `n`.
 *
 * # Safety
 * `x` must be a live handle; `out` must be writable.
 */
enum HdcovStatus hdcov_sample_covariance(const struct HdcovMatrix *x,
                                         bool unbiased,
                                         struct HdcovMatrix **out);

/**
 * Ledoit-Wolf estimate toward a scaled identity. `intensity` may be null.
 *
 * # Safety
 * `x` must be a live handle; `out` must be writable; `intensity` null or writable.
 */
enum HdcovStatus hdcov_ledoit_wolf(const struct HdcovMatrix *x,
                                   struct HdcovMatrix **out,
                                   double *intensity);

/**
 * Schäfer-Strimmer estimate; `target` is one of `'A'..='F'`.
 * `intensity` may be null.
 *
 * # Safety
 * `x` must be a live handle; `out` must be writable; `intensity` null or writable.
 */
enum HdcovStatus hdcov_schafer_strimmer(const struct HdcovMatrix *x,
                                        char target,
                                        struct HdcovMatrix **out,
                                        double *intensity);

/**
 * Stein eigenvalue-shrunk covariance from a `p × p` sample covariance
 * computed from `n` observations.
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum HdcovStatus hdcov_stein(const struct HdcovMatrix *s, size_t n, struct HdcovMatrix **out);

/**
 * Adaptive (entry-specific) thresholding of the sample covariance of `x`.
 *
 * # Safety
 * `x` must be a live handle; `out` must be writable.
 */
enum HdcovStatus hdcov_adaptive_threshold(const struct HdcovMatrix *x,
                                          double delta,
                                          bool soft,
                                          struct HdcovMatrix **out);

/**
 * Graphical lasso precision estimate for covariance `s`.
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum HdcovStatus hdcov_graphical_lasso(const struct HdcovMatrix *s,
                                       double lambda,
                                       double tol,
                                       struct HdcovMatrix **out);

/**
 * Partial correlations `−ω_ij / sqrt(ω_ii ω_jj)` of a precision matrix.
 *
 * # Safety
 * `omega` must be a live handle; `out` must be writable.
 */
enum HdcovStatus hdcov_partial_correlations(const struct HdcovMatrix *omega,
                                            struct HdcovMatrix **out);

/**
 * Benjamini-Hochberg at level `alpha`. Writes 1 for rejected hypotheses
 * and 0 otherwise into `rejected` (length `m`); the rejection count goes
 * to `num_rejected` unless it is null.
 *
 * # Safety
 * `pvalues` must be valid for `m` reads and `rejected` for `m` writes.
 */
enum HdcovStatus hdcov_benjamini_hochberg(const double *pvalues,
                                          size_t m,
                                          double alpha,
                                          uint8_t *rejected,
                                          size_t *num_rejected);

/**
 * Marchenko-Pastur CDF at `x` for scale `sigma` and ratio `y = p/n`.
 *
 * # Safety
 * `out` must be writable.
 */
enum HdcovStatus hdcov_mp_cdf(double x, double sigma, double y, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HDCOV_H */
