#ifndef TAYLOR_LSV_H
#define TAYLOR_LSV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

#define LSV_PAYOFF_CALL 0

#define LSV_PAYOFF_PUT 1

#define LSV_PAYOFF_BOND 2

#define LSV_PAYOFF_FORWARD 3

// Result codes.
typedef enum LsvStatus {
  LSV_STATUS_OK = 0,
  LSV_STATUS_NULL_POINTER = 1,
  LSV_STATUS_INVALID_UTF8 = 2,
  LSV_STATUS_PARSE = 3,
  LSV_STATUS_USAGE = 4,
  LSV_STATUS_MODEL = 5,
  LSV_STATUS_CAPABILITY = 6,
  LSV_STATUS_NUMERIC = 7,
  LSV_STATUS_DOMAIN = 8,
  LSV_STATUS_INPUT = 9,
  LSV_STATUS_IO = 10,
  LSV_STATUS_BUFFER_TOO_SMALL = 11,
  LSV_STATUS_PANIC = 12,
} LsvStatus;

// Opaque model handle with its correction operators.
typedef struct LsvModel LsvModel;

// Parses a model description and builds its correction operators.
// On success `*out` owns a handle to release with `lsv_model_free`.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a writable pointer.
enum LsvStatus lsv_model_from_text(const char *text, struct LsvModel **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `model` must come from `lsv_model_from_text` and not be used afterwards.
void lsv_model_free(struct LsvModel *model);

// Expansion order N the handle was built for.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum LsvStatus lsv_model_order(const struct LsvModel *model, size_t *out);

// Price series `u_0..u_N` for a payoff (`LSV_PAYOFF_*`) maturing at `maturity`.
// `log_strike` is ignored for bonds and forwards. `out_terms` needs N + 1
// slots; `out_total` (may be null) receives the sum.
//
// # Safety
// `model` must be a live handle; `out_terms` must hold `len` doubles.
enum LsvStatus lsv_price(const struct LsvModel *model,
                         uint32_t payoff_kind,
                         double log_strike,
                         double maturity,
                         double *out_terms,
                         size_t len,
                         double *out_total);

// Implied-vol series `sigma_0..sigma_N` of a call at `log_strike`.
//
// # Safety
// As for `lsv_price`.
enum LsvStatus lsv_implied_vol(const struct LsvModel *model,
                               double log_strike,
                               double maturity,
                               double *out_terms,
                               size_t len,
                               double *out_total);

// Yield `-log(u) / tau` of the unit bond using the full series.
//
// # Safety
// `model` must be a live handle and `out` writable.
enum LsvStatus lsv_yield(const struct LsvModel *model, double maturity, double *out);

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *lsv_last_error(void);

#endif  /* TAYLOR_LSV_H */
