#ifndef PRANDTL_MHD_H
#define PRANDTL_MHD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum PmStatus {
  PM_STATUS_OK = 0,
  PM_STATUS_NULL_POINTER = 1,
  PM_STATUS_INVALID_ARGUMENT = 2,
  PM_STATUS_CONFIG = 3,
  PM_STATUS_GATE = 4,
  PM_STATUS_CFL = 5,
  PM_STATUS_BLOWUP = 6,
  PM_STATUS_POSITIVITY = 7,
  PM_STATUS_INITIAL_DATA = 8,
  PM_STATUS_IO = 9,
  PM_STATUS_NO_DATA = 10,
  PM_STATUS_FIT = 11,
  PM_STATUS_NUMERICAL = 12,
  PM_STATUS_PANIC = 13,
} PmStatus;

/**
 * Opaque result of one ε case.
 */
typedef struct PmCase PmCase;

/**
 * Opaque study configuration.
 */
typedef struct PmConfig PmConfig;

/**
 * Opaque convergence report of an ε-sweep.
 */
typedef struct PmReport PmReport;

/**
 * One row of the convergence table.
 */
typedef struct PmRow {
  double eps;
  double linf_error;
  double l2_error;
  double linf[4];
  double remainder_l2[4];
  double walltime_s;
} PmRow;

/**
 * Least-squares fit of log error against log ε.
 */
typedef struct PmRateFit {
  double slope;
  double intercept;
  double ci95;
  size_t n_points;
} PmRateFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pm_version(void);

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t pm_last_error_message(char *buf, size_t len);

/**
 * Default configuration.
 *
 * # Safety
 * `out` must point to a writable handle slot.
 */
enum PmStatus pm_config_default(struct PmConfig **out);

/**
 * Parse `key = value` text on top of the defaults.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out` a writable handle slot.
 */
enum PmStatus pm_config_parse(const char *source, struct PmConfig **out);

/**
 * Replace the ε list (must stay strictly decreasing in (0, 1]).
 *
 * # Safety
 * `cfg` must be a live config handle; `eps` must point to `n` doubles.
 */
enum PmStatus pm_config_set_eps_list(struct PmConfig *cfg, const double *eps, size_t n);

/**
 * # Safety
 * `cfg` must be null or a handle from this library not yet freed.
 */
void pm_config_free(struct PmConfig *cfg);

/**
 * Run the whole pipeline at one ε.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` a writable handle slot.
 */
enum PmStatus pm_run_pipeline(const struct PmConfig *cfg, double eps, struct PmCase **out);

/**
 * Sup-time L∞ and L² errors against the comparand.
 *
 * # Safety
 * `case` must be a live case handle; the outputs must be writable or null.
 */
enum PmStatus pm_case_errors(const struct PmCase *case_, double *linf, double *l2);

/**
 * The convergence-table row of a case.
 *
 * # Safety
 * `case` must be a live case handle; `row` must be writable.
 */
enum PmStatus pm_case_row(const struct PmCase *case_, struct PmRow *row);

/**
 * # Safety
 * `case` must be null or a handle from this library not yet freed.
 */
void pm_case_free(struct PmCase *case_);

/**
 * Run the ε-sweep on `jobs` workers. Failed ε cases are recorded in the
 * report; see `pm_report_failures`.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` a writable handle slot.
 */
enum PmStatus pm_run_study(const struct PmConfig *cfg, size_t jobs, struct PmReport **out);

/**
 * Number of completed rows.
 *
 * # Safety
 * `report` must be null or a live report handle.
 */
size_t pm_report_rows(const struct PmReport *report);

/**
 * Number of failed ε cases.
 *
 * # Safety
 * `report` must be null or a live report handle.
 */
size_t pm_report_failures(const struct PmReport *report);

/**
 * Row `k` of the convergence table.
 *
 * # Safety
 * `report` must be a live report handle; `row` must be writable.
 */
enum PmStatus pm_report_row(const struct PmReport *report, size_t k, struct PmRow *row);

/**
 * Fitted rate of the L∞ error. Fails with `NoData` when no fit exists.
 *
 * # Safety
 * `report` must be a live report handle; `fit` must be writable.
 */
enum PmStatus pm_report_fit(const struct PmReport *report, struct PmRateFit *fit);

/**
 * Write convergence.csv and rate.txt into `dir`.
 *
 * # Safety
 * `report` must be a live report handle; `dir` a NUL-terminated path.
 */
enum PmStatus pm_report_emit(const struct PmReport *report, const char *dir);

/**
 * # Safety
 * `report` must be null or a handle from this library not yet freed.
 */
void pm_report_free(struct PmReport *report);

/**
 * Fit error ≈ C ε^slope over `n` pairs.
 *
 * # Safety
 * `eps` and `errors` must point to `n` doubles; `fit` must be writable.
 */
enum PmStatus pm_fit_rate(const double *eps, const double *errors, size_t n, struct PmRateFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRANDTL_MHD_H */
