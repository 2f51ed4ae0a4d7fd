#ifndef SNAIPW_H
#define SNAIPW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  SNAIPW_STATUS_OK = 0,
  SNAIPW_STATUS_NULL_POINTER = 1,
  SNAIPW_STATUS_INVALID_ARGUMENT = 2,
  SNAIPW_STATUS_IO = 3,
  SNAIPW_STATUS_INVALID_LOG = 4,
  SNAIPW_STATUS_FIT_FAILED = 5,
  SNAIPW_STATUS_INFERENCE_FAILED = 6,
  SNAIPW_STATUS_CONTRACT_FAILED = 7,
  SNAIPW_STATUS_PANIC = 8,
} SnaipwStatus;

typedef enum {
  SNAIPW_CRITICAL_Z = 0,
  SNAIPW_CRITICAL_T = 1,
} SnaipwCritical;

typedef enum {
  /**
   * Forward cross-fitted linear regressions.
   */
  SNAIPW_NUISANCE_FORWARD = 0,
  /**
   * Zero regression, i.e. IPW.
   */
  SNAIPW_NUISANCE_ZERO = 1,
  /**
   * Single fit on all units. Breaks predictability.
   */
  SNAIPW_NUISANCE_LEAKY_FULL = 2,
} SnaipwNuisance;

/**
 * Opaque experiment log.
 */
typedef struct SnaipwLog SnaipwLog;

/**
 * Opaque blocking plan.
 */
typedef struct SnaipwPlan SnaipwPlan;

typedef struct {
  double theta_hat;
  double v_hat;
  double se_hat;
  size_t n_eff;
  double ci_lo;
  double ci_hi;
  double critical_value;
  /**
   * Set when every score is equal and `v_hat` is zero.
   */
  bool degenerate;
} SnaipwInterval;

/**
 * Per-check result: 0 pass, 1 warn, 2 fail.
 */
typedef struct {
  int32_t propensity_calibration;
  int32_t executed_overlap;
  int32_t scored_set;
  int32_t predictability;
  int32_t fixed_horizon;
  bool any_fail;
} SnaipwContract;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call into this library on the same thread.
 */
const char *snaipw_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *snaipw_version(void);

/**
 * AIPW score of one unit.
 */
double snaipw_aipw_score(uint8_t a, double y, double pi, double m0, double m1);

/**
 * Builds a log from column arrays. `x` is row-major `n × p` and may be NULL
 * when `p == 0`. Arrival indices are `1..n` in array order.
 */
SnaipwStatus snaipw_log_new(size_t n,
                            size_t p,
                            const double *x,
                            const uint8_t *a,
                            const double *y,
                            const double *pi,
                            SnaipwLog **out);

/**
 * Reads a JSONL or CSV log; the format follows the file extension.
 */
SnaipwStatus snaipw_log_load(const char *path, SnaipwLog **out);

void snaipw_log_free(SnaipwLog *log);

/**
 * Number of units, or 0 for NULL.
 */
size_t snaipw_log_len(const SnaipwLog *log);

/**
 * `k` near-equal contiguous blocks; the first block is never scored.
 */
SnaipwStatus snaipw_plan_forward(size_t n, size_t k, SnaipwPlan **out);

/**
 * Burn-in of `n0` units followed by one scored block.
 */
SnaipwStatus snaipw_plan_burnin(size_t n, size_t n0, SnaipwPlan **out);

/**
 * Every unit scored; only meaningful with fixed nuisances.
 */
SnaipwStatus snaipw_plan_all(size_t n, SnaipwPlan **out);

void snaipw_plan_free(SnaipwPlan *plan);

/**
 * Size of the scored set, or 0 for NULL.
 */
size_t snaipw_plan_n_eff(const SnaipwPlan *plan);

/**
 * Self-normalized interval from precomputed scores.
 */
SnaipwStatus snaipw_sn_interval(const double *scores,
                                size_t len,
                                double alpha,
                                SnaipwCritical crit,
                                SnaipwInterval *out);

/**
 * Interval with a supplied variance `v_fix` in place of the sample variance.
 */
SnaipwStatus snaipw_fixed_v_interval(const double *scores,
                                     size_t len,
                                     double v_fix,
                                     double alpha,
                                     SnaipwInterval *out);

/**
 * Fits nuisances, scores the plan's scored set, and writes the
 * self-normalized interval.
 */
SnaipwStatus snaipw_infer(const SnaipwLog *log,
                          const SnaipwPlan *plan,
                          SnaipwNuisance nuisance,
                          double alpha,
                          SnaipwCritical crit,
                          SnaipwInterval *out);

/**
 * Runs the logging-contract checks for the given nuisance mode. Returns
 * `SNAIPW_STATUS_CONTRACT_FAILED` when any check fails; `out` is filled in
 * either way.
 */
SnaipwStatus snaipw_contract_check(const SnaipwLog *log,
                                   const SnaipwPlan *plan,
                                   SnaipwNuisance nuisance,
                                   double epsilon,
                                   size_t horizon,
                                   SnaipwContract *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNAIPW_H */
