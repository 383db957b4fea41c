/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef HOUSEREG_H
#define HOUSEREG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum HrStatus {
  HR_STATUS_OK = 0,
  HR_STATUS_NULL_POINTER = 1,
  HR_STATUS_INVALID_ARGUMENT = 2,
  HR_STATUS_IO = 3,
  HR_STATUS_CORRUPT = 4,
  HR_STATUS_VERSION = 5,
  HR_STATUS_CHECKSUM = 6,
  HR_STATUS_DIMENSION_MISMATCH = 7,
  HR_STATUS_NUMERIC = 8,
  HR_STATUS_UNSUPPORTED = 9,
  HR_STATUS_PANIC = 10,
} HrStatus;

// Opaque model handle.
typedef struct HrModel HrModel;

// Hyperparameters for `hr_boost_fit`. Fill with `hr_boost_params_default`
// before changing individual fields.
typedef struct HrBoostParams {
  size_t n_rounds;
  double learning_rate;
  double lambda;
  double gamma;
  size_t max_depth;
  double min_child_weight;
  double subsample;
  uint64_t seed;
} HrBoostParams;

typedef struct HrMetrics {
  double r2;
  double adj_r2;
  double mse;
  double rmse;
  double mae;
} HrMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *hr_version(void);

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *hr_last_error(void);

// Loads a model artifact written by the harness or `hr_model_save`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum HrStatus hr_model_load(const char *path, struct HrModel **out);

// Writes the model as an artifact file.
//
// # Safety
// `model` must come from this library; `path` must be NUL-terminated.
enum HrStatus hr_model_save(const struct HrModel *model, const char *path);

// Releases a handle. Null is ignored.
//
// # Safety
// `model` must come from this library and not be used afterwards.
void hr_model_free(struct HrModel *model);

// Number of input features the model expects.
//
// # Safety
// `model` must come from this library; `out` must be writable.
enum HrStatus hr_model_n_features(const struct HrModel *model, size_t *out);

// Predicts `n_rows` encoded rows into `out` (length `n_rows`), in the
// model's target space.
//
// # Safety
// `x` must hold `n_rows * n_cols` doubles and `out` `n_rows` doubles.
enum HrStatus hr_model_predict_matrix(const struct HrModel *model,
                                      const double *x,
                                      size_t n_rows,
                                      size_t n_cols,
                                      double *out);

// Writes the library defaults into `params`.
//
// # Safety
// `params` must be writable.
enum HrStatus hr_boost_params_default(struct HrBoostParams *params);

// Fits a boosted model on an encoded matrix. `params` may be null for the
// defaults.
//
// # Safety
// `x` must hold `n_rows * n_cols` doubles, `y` `n_rows` doubles, and `out`
// must be writable.
enum HrStatus hr_boost_fit(const double *x,
                           size_t n_rows,
                           size_t n_cols,
                           const double *y,
                           const struct HrBoostParams *params,
                           struct HrModel **out);

// Normalized gain importance per feature into `out` (length `len`, which
// must equal the model's feature count). Boost models only.
//
// # Safety
// `out` must hold `len` doubles.
enum HrStatus hr_model_feature_importance(const struct HrModel *model, double *out, size_t len);

// All five metrics of `yhat` against `y`; `k` is the regressor count for
// adjusted R².
//
// # Safety
// `y` and `yhat` must hold `n` doubles; `out` must be writable.
enum HrStatus hr_metrics(const double *y,
                         const double *yhat,
                         size_t n,
                         size_t k,
                         struct HrMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOUSEREG_H */
