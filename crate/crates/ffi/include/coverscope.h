#ifndef COVERSCOPE_H
#define COVERSCOPE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_ARGUMENT = 2,
  CS_STATUS_INVALID_DATA = 3,
  CS_STATUS_IO = 4,
  CS_STATUS_NUMERICAL = 5,
  CS_STATUS_SCHEMA = 6,
  CS_STATUS_PANIC = 7,
} CsStatus;

// Opaque fitted HMM.
typedef struct CsFit CsFit;

// Opaque trained classifier.
typedef struct CsModel CsModel;

// Parameters of a single-series HMM evaluation.
typedef struct CsHmmParams {
  // Intercept including any random effects for the series.
  double beta0;
  double beta1;
  // Emission standard deviation.
  double sigma;
  // Frames by which the defender trails the receivers.
  size_t lag;
  // Sharpness of the initial state distribution.
  double init_alpha;
} CsHmmParams;

// Fitted HMM hyperparameters.
typedef struct CsTheta {
  double beta0;
  double beta1;
  double sigma;
  double sigma_u;
  double sigma_v;
  double sigma_w;
} CsTheta;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *cs_last_error(void);

void cs_clear_last_error(void);

// Library version as a static NUL-terminated string.
const char *cs_version(void);

// Log-likelihood of one defender series.
//
// # Safety
// `y` must hold `n_frames` values, `offense_y` `5 * n_frames`.
enum CsStatus cs_forward_loglik(const double *y,
                                const double *offense_y,
                                size_t n_frames,
                                const struct CsHmmParams *params,
                                double *out);

// Smoothed state probabilities, frame-major (`out[t * 5 + j]`).
//
// # Safety
// As [`cs_forward_loglik`]; `out` must hold `5 * n_frames` values.
enum CsStatus cs_local_decode(const double *y,
                              const double *offense_y,
                              size_t n_frames,
                              const struct CsHmmParams *params,
                              double *out);

// `(total switches, defenders with at least one switch)` over
// `n_sequences` state sequences of `n_frames` each, sequence-major.
//
// # Safety
// `states` must hold `n_sequences * n_frames` values.
enum CsStatus cs_switch_stats(const uint32_t *states,
                              size_t n_sequences,
                              size_t n_frames,
                              size_t *total,
                              size_t *n_switching);

// Mean over sequences of the entropy of each sequence's state frequencies.
//
// # Safety
// As [`cs_switch_stats`].
enum CsStatus cs_mean_entropy(const uint32_t *states,
                              size_t n_sequences,
                              size_t n_frames,
                              double *out);

// Rank-based area under the ROC curve.
//
// # Safety
// `y` and `p` must hold `n` values.
enum CsStatus cs_auc(const double *y, const double *p, size_t n, double *out);

// Mean Bernoulli log loss on clipped probabilities.
//
// # Safety
// `y` and `p` must hold `n` values.
enum CsStatus cs_log_loss(const double *y, const double *p, size_t n, double *out);

// Load a fit written by `coverscope fit-hmm`.
//
// # Safety
// `path` must be NUL-terminated; `out` must be writable.
enum CsStatus cs_fit_load(const char *path, struct CsFit **out);

// # Safety
// `fit` must come from [`cs_fit_load`] and not be used afterwards.
void cs_fit_free(struct CsFit *fit);

// # Safety
// `fit` must be a live handle.
enum CsStatus cs_fit_theta(const struct CsFit *fit, struct CsTheta *out);

// Lag the fit was estimated at.
//
// # Safety
// `fit` must be a live handle.
enum CsStatus cs_fit_lag(const struct CsFit *fit, size_t *out);

// Predicted play effect for `gameId/playId`.
//
// # Safety
// `fit` must be a live handle and `play_key` NUL-terminated.
enum CsStatus cs_fit_play_effect(const struct CsFit *fit, const char *play_key, double *out);

// Load a model written by `coverscope train`.
//
// # Safety
// `path` must be NUL-terminated; `out` must be writable.
enum CsStatus cs_model_load(const char *path, struct CsModel **out);

// # Safety
// `model` must come from [`cs_model_load`] and not be used afterwards.
void cs_model_free(struct CsModel *model);

// Number of input columns, or 0 for a null handle.
//
// # Safety
// `model` must be a live handle or null.
size_t cs_model_n_features(const struct CsModel *model);

// Name of column `i`, owned by the model; null when out of range.
//
// # Safety
// `model` must be a live handle or null.
const char *cs_model_feature_name(const struct CsModel *model, size_t i);

// Man-coverage probabilities for `n_rows` row-major rows whose columns
// follow the model's feature order.
//
// # Safety
// `x` must hold `n_rows * n_cols` values and `out` `n_rows`.
enum CsStatus cs_model_predict(const struct CsModel *model,
                               const double *x,
                               size_t n_rows,
                               size_t n_cols,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COVERSCOPE_H */
