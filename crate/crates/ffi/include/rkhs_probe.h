#ifndef RKHS_PROBE_H
#define RKHS_PROBE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Limit classification of a variance report.
 */
typedef enum RkpLimitFlag {
  RKP_LIMIT_FLAG_TENDS_TO_ZERO = 0,
  RKP_LIMIT_FLAG_BOUNDED_AWAY_FROM_ZERO = 1,
  RKP_LIMIT_FLAG_DEGENERATE_ZERO = 2,
  RKP_LIMIT_FLAG_INCONCLUSIVE = 3,
} RkpLimitFlag;

/**
 * Result codes of the C interface.
 */
typedef enum RkpStatus {
  RKP_STATUS_OK = 0,
  RKP_STATUS_NULL_POINTER = 1,
  RKP_STATUS_INVALID_ARGUMENT = 2,
  RKP_STATUS_LENGTH = 3,
  RKP_STATUS_DOMAIN = 4,
  RKP_STATUS_PRECISION = 5,
  RKP_STATUS_DEGENERATE = 6,
  RKP_STATUS_SINGULAR = 7,
  RKP_STATUS_UNSUPPORTED = 8,
  RKP_STATUS_PARSE = 9,
  RKP_STATUS_UTF8 = 10,
  RKP_STATUS_OUT_OF_RANGE = 11,
  RKP_STATUS_PANIC = 12,
} RkpStatus;

/**
 * Spectral family handle.
 */
typedef struct RkpFamily RkpFamily;

/**
 * Covariance kernel handle.
 */
typedef struct RkpKernel RkpKernel;

/**
 * Even-moment sequence handle.
 */
typedef struct RkpMoments RkpMoments;

/**
 * BLUE variance report handle.
 */
typedef struct RkpVarianceReport RkpVarianceReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *rkp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rkp_version(void);

/**
 * Release a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void rkp_string_free(char *s);

/**
 * Parse a family from `{"family": ..., "params": {...}}`.
 *
 * # Safety
 * `json_text` must be a NUL-terminated string; `out` must be writable.
 */
enum RkpStatus rkp_family_from_json(const char *json_text, struct RkpFamily **out);

/**
 * Serialise a family to JSON.
 *
 * # Safety
 * `family` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_family_to_json(const struct RkpFamily *family, char **out);

/**
 * # Safety
 * `family` must be NULL or a handle not yet freed.
 */
void rkp_family_free(struct RkpFamily *family);

/**
 * Even moments `b_0, ..., b_{n_max}` of a family.
 *
 * # Safety
 * `family` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_even_moments(const struct RkpFamily *family,
                                size_t n_max,
                                struct RkpMoments **out);

/**
 * Moment sequence from decimal or `p/q` strings, e.g. `"1"`, `"1/3"`, `"0.2"`.
 *
 * # Safety
 * `values` must point to `len` NUL-terminated strings; `out` must be writable.
 */
enum RkpStatus rkp_moments_from_strings(const char *const *values,
                                        size_t len,
                                        struct RkpMoments **out);

/**
 * Number of stored moments.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_moments_len(const struct RkpMoments *m, size_t *out);

/**
 * `b_j` as text (`p/q` when exact).
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_moments_get(const struct RkpMoments *m, size_t j, char **out);

/**
 * CSV export of the moments.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_moments_to_csv(const struct RkpMoments *m, char **out);

/**
 * Tilted sequence `b_{j+m}`.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_shift_measure(const struct RkpMoments *m, size_t shift, struct RkpMoments **out);

/**
 * Moments of `gamma delta_0 + (1 - gamma) mu`; `gamma` as text.
 *
 * # Safety
 * `m` must be a live handle, `gamma` a NUL-terminated string; `out` must be writable.
 */
enum RkpStatus rkp_mix_atom(const struct RkpMoments *m, const char *gamma, struct RkpMoments **out);

/**
 * # Safety
 * `m` must be NULL or a handle not yet freed.
 */
void rkp_moments_free(struct RkpMoments *m);

/**
 * `H_n` and `G_n` as text.
 *
 * # Safety
 * `m` must be a live handle; `h_out` and `g_out` must be writable.
 */
enum RkpStatus rkp_hankel_pair(const struct RkpMoments *m, size_t n, char **h_out, char **g_out);

/**
 * Least-squares polynomial approximation value, equal to `H_n / G_n`.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_polyapprox_oracle(const struct RkpMoments *m, size_t n, char **out);

/**
 * `var_n = H_n / G_n` for `n = 0..=n_max`.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_blue_variance_seq(const struct RkpMoments *m,
                                     size_t n_max,
                                     struct RkpVarianceReport **out);

/**
 * Number of entries (`n_max + 1`).
 *
 * # Safety
 * `r` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_report_len(const struct RkpVarianceReport *r, size_t *out);

/**
 * `var_n` as text (`p/q` when exact).
 *
 * # Safety
 * `r` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_report_variance(const struct RkpVarianceReport *r, size_t n, char **out);

/**
 * `var_n` rounded to double.
 *
 * # Safety
 * `r` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_report_variance_f64(const struct RkpVarianceReport *r, size_t n, double *out);

/**
 * Limit classification of the sequence.
 *
 * # Safety
 * `r` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_report_limit_flag(const struct RkpVarianceReport *r, enum RkpLimitFlag *out);

/**
 * CSV export of the report.
 *
 * # Safety
 * `r` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_report_to_csv(const struct RkpVarianceReport *r, char **out);

/**
 * # Safety
 * `r` must be NULL or a handle not yet freed.
 */
void rkp_report_free(struct RkpVarianceReport *r);

/**
 * Kernel from a family object or `{"family": {...}, "sigma2": s}`.
 *
 * # Safety
 * `json_text` must be a NUL-terminated string; `out` must be writable.
 */
enum RkpStatus rkp_kernel_from_json(const char *json_text, struct RkpKernel **out);

/**
 * `sigma^2 k(u)` rounded to double.
 *
 * # Safety
 * `k` must be a live handle; `out` must be writable.
 */
enum RkpStatus rkp_kernel_eval(const struct RkpKernel *k, double u, double *out);

/**
 * # Safety
 * `k` must be NULL or a handle not yet freed.
 */
void rkp_kernel_free(struct RkpKernel *k);

/**
 * Kriging with exact observations. Writes the conditional mean and
 * variance at each of the `n_queries` queries and the MLE of the scale.
 * Any of the three outputs may be NULL to skip it.
 *
 * # Safety
 * Array arguments must hold `n_points` or `n_queries` doubles as named;
 * `k` must be a live handle.
 */
enum RkpStatus rkp_krige(const struct RkpKernel *k,
                         const double *points,
                         const double *values,
                         size_t n_points,
                         const double *queries,
                         size_t n_queries,
                         double *mean_out,
                         double *var_out,
                         double *sigma2_hat_out);

/**
 * Variance `1 / (F^T K^{-1} F)` of the discrete BLUE for regressor values `F`.
 *
 * # Safety
 * `points` and `regressor` must hold `n_points` doubles; `k` must be a live
 * handle; `out` must be writable.
 */
enum RkpStatus rkp_blue_discrete_variance(const struct RkpKernel *k,
                                          const double *points,
                                          const double *regressor,
                                          size_t n_points,
                                          double *out);

/**
 * Numeric value of a status, for bindings that cannot use the enum.
 */
int rkp_status_code(enum RkpStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RKHS_PROBE_H */
