#ifndef JPS_H
#define JPS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum JpsStatus {
  JPS_STATUS_OK = 0,
  JPS_STATUS_NULL_POINTER = 1,
  JPS_STATUS_INVALID_ARGUMENT = 2,
  JPS_STATUS_EMPTY_STRATUM = 3,
  JPS_STATUS_CONDITIONING_EXHAUSTED = 4,
  JPS_STATUS_NUMERIC = 5,
  JPS_STATUS_BUFFER_TOO_SMALL = 6,
  JPS_STATUS_PANIC = 7,
} JpsStatus;

/**
 * Estimators reachable through the C ABI.
 */
typedef enum JpsMethod {
  JPS_METHOD_SRS = 0,
  JPS_METHOD_ST = 1,
  JPS_METHOD_ML = 2,
  /**
   * Isotonized, empty strata dropped.
   */
  JPS_METHOD_ISO = 3,
  /**
   * Isotonized, fails with `EMPTY_STRATUM` if any stratum is empty.
   */
  JPS_METHOD_ISO_NO_EMPTY = 4,
  JPS_METHOD_ISO_MINUS = 5,
  JPS_METHOD_ISO_PLUS = 6,
  JPS_METHOD_ISO_STAR = 7,
  JPS_METHOD_SM = 8,
  JPS_METHOD_SM_STAR = 9,
} JpsMethod;

typedef struct JpsEstimateHandle JpsEstimateHandle;

/**
 * Multi-ranker sample with per-ranker scores.
 */
typedef struct JpsMultiSampleHandle JpsMultiSampleHandle;

/**
 * Single-ranker sample.
 */
typedef struct JpsSampleHandle JpsSampleHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns the full message length
 * excluding the terminator. `buf` may be null to query the length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t jps_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *jps_version(void);

/**
 * Builds a single-ranker sample from `n` values in `1..=num_categories`
 * and ranks in `1..=set_size`.
 *
 * # Safety
 * `values` and `ranks` must be valid for `n` reads; `out` must be writable.
 */
enum JpsStatus jps_sample_new(const size_t *values,
                              const size_t *ranks,
                              size_t n,
                              size_t set_size,
                              size_t num_categories,
                              struct JpsSampleHandle **out);

/**
 * # Safety
 * `sample` must come from [`jps_sample_new`] and not be used afterwards.
 */
void jps_sample_free(struct JpsSampleHandle *sample);

/**
 * Number of empty strata of a sample, written to `out`.
 *
 * # Safety
 * `sample` must be a live handle; `out` must be writable.
 */
enum JpsStatus jps_sample_num_empty_strata(const struct JpsSampleHandle *sample, size_t *out);

/**
 * Builds a multi-ranker sample. `ranks` and `scores` are row-major
 * `n x num_rankers`; `scores` may be null, in which case the multi-ranker
 * estimators use equal ranker weights.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `out` must be writable.
 */
enum JpsStatus jps_multi_sample_new(const size_t *values,
                                    const size_t *ranks,
                                    const double *scores,
                                    size_t n,
                                    size_t num_rankers,
                                    size_t set_size,
                                    size_t num_categories,
                                    struct JpsMultiSampleHandle **out);

/**
 * # Safety
 * `sample` must come from [`jps_multi_sample_new`] and not be used afterwards.
 */
void jps_multi_sample_free(struct JpsMultiSampleHandle *sample);

/**
 * Runs a single-ranker estimator.
 *
 * # Safety
 * `sample` must be a live handle; `out` must be writable.
 */
enum JpsStatus jps_estimate(const struct JpsSampleHandle *sample,
                            enum JpsMethod method,
                            struct JpsEstimateHandle **out);

/**
 * Runs any estimator on a multi-ranker sample. Single-ranker methods use
 * the first ranker.
 *
 * # Safety
 * `sample` must be a live handle; `out` must be writable.
 */
enum JpsStatus jps_estimate_multi(const struct JpsMultiSampleHandle *sample,
                                  enum JpsMethod method,
                                  struct JpsEstimateHandle **out);

/**
 * # Safety
 * `estimate` must come from `jps_estimate*` and not be used afterwards.
 */
void jps_estimate_free(struct JpsEstimateHandle *estimate);

/**
 * Number of categories `Q`; 0 for a null handle.
 *
 * # Safety
 * `estimate` must be null or a live handle.
 */
size_t jps_estimate_num_categories(const struct JpsEstimateHandle *estimate);

/**
 * Copies `p_1..p_Q` into `out` (capacity `out_len`).
 *
 * # Safety
 * `estimate` must be a live handle; `out` must be valid for `out_len` writes.
 */
enum JpsStatus jps_estimate_proportions(const struct JpsEstimateHandle *estimate,
                                        double *out,
                                        size_t out_len);

/**
 * Copies `c_1..c_{Q-1}` into `out` (capacity `out_len`).
 *
 * # Safety
 * `estimate` must be a live handle; `out` must be valid for `out_len` writes.
 */
enum JpsStatus jps_estimate_cumulative(const struct JpsEstimateHandle *estimate,
                                       double *out,
                                       size_t out_len);

/**
 * Iteration count and convergence flag of an ML fit. Non-iterative
 * estimators report 0 iterations and `converged = 1`.
 *
 * # Safety
 * `estimate` must be a live handle; outputs must be writable.
 */
enum JpsStatus jps_estimate_fit(const struct JpsEstimateHandle *estimate,
                                size_t *iterations,
                                bool *converged);

/**
 * Regularized incomplete beta `B_x(h, m)` for positive integers `h`, `m`.
 *
 * # Safety
 * `out` must be writable.
 */
enum JpsStatus jps_incomplete_beta(double x, size_t h, size_t m, double *out);

/**
 * Category pmf of the `h`-th order statistic in a set of `set_size`,
 * given the cumulative law `cumulative[0..num_categories]` (last entry 1).
 *
 * # Safety
 * `cumulative` must be valid for `num_categories` reads and `out` for `out_len` writes.
 */
enum JpsStatus jps_order_stat_pmf(size_t h,
                                  size_t set_size,
                                  const double *cumulative,
                                  size_t num_categories,
                                  double *out,
                                  size_t out_len);

/**
 * Weighted least-squares non-increasing fit (PAVA).
 *
 * # Safety
 * `values` and `weights` must be valid for `len` reads and `out` for `len` writes.
 */
enum JpsStatus jps_pava_non_increasing(const double *values,
                                       const double *weights,
                                       size_t len,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JPS_H */
