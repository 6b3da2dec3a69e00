#ifndef NECKLAB_H
#define NECKLAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NlIsoMode {
  NL_ISO_MODE_PIC = 0,
  NL_ISO_MODE_PIC1 = 1,
  NL_ISO_MODE_PIC2 = 2,
} NlIsoMode;

typedef enum NlStatus {
  NL_STATUS_OK = 0,
  NL_STATUS_NULL_POINTER = 1,
  NL_STATUS_INVALID_ARGUMENT = 2,
  NL_STATUS_COMPUTATION = 3,
  NL_STATUS_IO = 4,
  NL_STATUS_PANIC = 5,
} NlStatus;

/**
 * Opaque curvature operator.
 */
typedef struct NlOperator NlOperator;

/**
 * Opaque result of a suite run.
 */
typedef struct NlReport NlReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread; empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *nl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nl_version(void);

/**
 * Unit cylinder `S^{n-1} × R`.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum NlStatus nl_operator_cylinder(size_t n, struct NlOperator **out);

/**
 * Unit round sphere `S^n`.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum NlStatus nl_operator_sphere(size_t n, struct NlOperator **out);

/**
 * Operator from `n^4` components `R_ijkl` in row-major order.
 *
 * # Safety
 * `components` must point to `len` readable doubles; `out` must be valid.
 */
enum NlStatus nl_operator_from_components(size_t n,
                                          const double *components,
                                          size_t len,
                                          struct NlOperator **out);

/**
 * Releases an operator. Null is ignored.
 *
 * # Safety
 * `op` must come from an `nl_operator_*` constructor and not be freed twice.
 */
void nl_operator_free(struct NlOperator *op);

/**
 * # Safety
 * `op` and `out` must be valid.
 */
enum NlStatus nl_operator_dimension(const struct NlOperator *op, size_t *out);

/**
 * # Safety
 * `op` and `out` must be valid.
 */
enum NlStatus nl_operator_scalar(const struct NlOperator *op, double *out);

/**
 * Minimum of the isotropic-curvature form over orthonormal 4-frames.
 *
 * # Safety
 * `op` and `out` must be valid.
 */
enum NlStatus nl_operator_min_isotropic(const struct NlOperator *op,
                                        enum NlIsoMode mode,
                                        size_t budget,
                                        uint64_t seed,
                                        double *out);

/**
 * Signed uniform-PIC margin for constant `alpha`; `holds` is set when the margin is nonnegative.
 *
 * # Safety
 * `op`, `holds` and `margin` must be valid.
 */
enum NlStatus nl_operator_uniform_pic(const struct NlOperator *op,
                                      double alpha,
                                      size_t budget,
                                      uint64_t seed,
                                      bool *holds,
                                      double *margin);

/**
 * `(n−1)/(−2t)` for `t < 0`.
 *
 * # Safety
 * `out` must be valid.
 */
enum NlStatus nl_cylinder_scalar_curvature(size_t n, double t, double *out);

/**
 * `inf { λ : −λ(Ric − ρI) ≤ h ≤ λ(Ric − ρI) }` for symmetric `n × n` matrices in row-major order.
 *
 * # Safety
 * `h` and `ric` must point to `n * n` doubles; `out` must be valid.
 */
enum NlStatus nl_weighted_pinch_norm(size_t n,
                                     const double *h,
                                     const double *ric,
                                     double rho,
                                     double *out);

/**
 * Runs a suite described by a JSON config (same keys as the `neck-lab --config` file).
 * Null `config_json` runs the default configuration.
 *
 * # Safety
 * `config_json` must be null or a NUL-terminated string; `out` must be valid.
 */
enum NlStatus nl_suite_run(const char *config_json, struct NlReport **out);

/**
 * Releases a report. Null is ignored.
 *
 * # Safety
 * `report` must come from `nl_suite_run` and not be freed twice.
 */
void nl_report_free(struct NlReport *report);

/**
 * Passed and failed case counts.
 *
 * # Safety
 * All pointers must be valid.
 */
enum NlStatus nl_report_counts(const struct NlReport *report, size_t *passed, size_t *failed);

/**
 * The report as JSON; release with `nl_string_free`.
 *
 * # Safety
 * `report` and `out` must be valid.
 */
enum NlStatus nl_report_json(const struct NlReport *report, char **out);

/**
 * Writes report.json, timing.json and the CSV plot files into `dir`.
 *
 * # Safety
 * `report` must be valid and `dir` a NUL-terminated string.
 */
enum NlStatus nl_report_write(const struct NlReport *report, const char *dir);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void nl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NECKLAB_H */
