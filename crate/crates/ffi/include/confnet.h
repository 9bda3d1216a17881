#ifndef CONFNET_H
#define CONFNET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ConfnetStatus {
  CONFNET_STATUS_OK = 0,
  CONFNET_STATUS_NULL_POINTER = 1,
  CONFNET_STATUS_INVALID_UTF8 = 2,
  CONFNET_STATUS_PARSE = 3,
  CONFNET_STATUS_DOMAIN = 4,
  CONFNET_STATUS_DIMENSION = 5,
  CONFNET_STATUS_MANIFEST = 6,
  CONFNET_STATUS_GEOMETRY = 7,
  CONFNET_STATUS_UNKNOWN_COMMAND = 8,
  CONFNET_STATUS_IO = 9,
  CONFNET_STATUS_PANIC = 10,
  CONFNET_STATUS_OTHER = 11,
} ConfnetStatus;

// A parsed scalar expression in a fixed number of variables.
typedef struct ConfnetExpr ConfnetExpr;

// A metric on a chart.
typedef struct ConfnetMetric ConfnetMetric;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into the library from this thread.
const char *confnet_last_error(void);

// Library version as a static string.
const char *confnet_version(void);

// Parses `text` in the variables `names[0..dim]`.
//
// # Safety
// `text` and each of the `dim` entries of `names` must be NUL-terminated
// strings; `out` must be writable.
enum ConfnetStatus confnet_expr_parse(const char *text,
                                      const char *const *names,
                                      size_t dim,
                                      struct ConfnetExpr **out);

// Value, gradient (`dim` entries) and row-major Hessian (`dim * dim`
// entries) of `expr` at `point`. `grad` and `hess` may be null.
//
// # Safety
// `expr` must come from [`confnet_expr_parse`]; the buffers must hold the
// stated number of doubles.
enum ConfnetStatus confnet_expr_eval(const struct ConfnetExpr *expr,
                                     const double *point,
                                     double *value,
                                     double *grad,
                                     double *hess);

// # Safety
// `expr` must be null or come from [`confnet_expr_parse`], and not be used
// afterwards.
void confnet_expr_free(struct ConfnetExpr *expr);

// Builds the metric described by a manifest given as JSON text.
//
// # Safety
// `manifest_json` must be a NUL-terminated string and `out` writable.
enum ConfnetStatus confnet_metric_from_manifest(const char *manifest_json,
                                                struct ConfnetMetric **out);

// Chart dimension of `metric`, or 0 for null.
//
// # Safety
// `metric` must be null or a live handle.
size_t confnet_metric_dim(const struct ConfnetMetric *metric);

// Metric components at `point`, row-major into `g` (`dim * dim` doubles).
//
// # Safety
// `metric` must be a live handle; `point` holds `dim` doubles.
enum ConfnetStatus confnet_metric_eval(const struct ConfnetMetric *metric,
                                       const double *point,
                                       double *g);

// Christoffel symbols `Γ^k_ij` at `point`, written to
// `out[(k * dim + i) * dim + j]` (`dim³` doubles).
//
// # Safety
// `metric` must be a live handle; `point` holds `dim` doubles.
enum ConfnetStatus confnet_metric_christoffel(const struct ConfnetMetric *metric,
                                              const double *point,
                                              double *out);

// # Safety
// `metric` must be null or a live handle, and not be used afterwards.
void confnet_metric_free(struct ConfnetMetric *metric);

// Runs a command (`classify`, `verify-product`, `factorize`, `codazzi`,
// `selftest`) on a manifest given as JSON text, which may be null for
// `selftest`. On success `*report` receives the JSON report and
// `*exit_code` the command-line exit code (0 pass, 2 fail, 3 inconclusive).
//
// # Safety
// String arguments must be NUL-terminated; `report` and `exit_code` must
// be writable.
enum ConfnetStatus confnet_run(const char *manifest_json,
                               const char *command,
                               char **report,
                               int32_t *exit_code);

// # Safety
// `s` must be null or a string returned by this library.
void confnet_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONFNET_H */
