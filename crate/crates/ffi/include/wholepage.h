#ifndef WHOLEPAGE_H
#define WHOLEPAGE_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WpStatus {
  WP_STATUS_OK = 0,
  WP_STATUS_NULL_POINTER = 1,
  WP_STATUS_INVALID_INPUT = 2,
  WP_STATUS_ESTIMATION_FAILED = 3,
  WP_STATUS_INVARIANT_VIOLATED = 4,
  WP_STATUS_PANIC = 5,
} WpStatus;

/**
 * Page regions. Functions taking region codes as integers use these values.
 */
typedef enum WpRegion {
  WP_REGION_TOP = 0,
  WP_REGION_MIDDLE = 1,
  WP_REGION_BOTTOM = 2,
} WpRegion;

/**
 * Fitted downstream-value model.
 */
typedef struct WpModel WpModel;

/**
 * Read-only ranker built from a serialized bundle.
 */
typedef struct WpRanker WpRanker;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *wp_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void wp_string_free(char *s);

/**
 * Region of a 1-based page position.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum WpStatus wp_region_of_position(uint32_t position, enum WpRegion *out);

/**
 * Region-weighted, pixel-area-weighted brand match rate of one page.
 *
 * Slot `i` lies in region `regions[i]` (a [`WpRegion`] code), covers
 * `pixel_areas[i]` and matches the query brand when `matched[i]` is true.
 * `weights` holds the top, middle and bottom weights.
 *
 * # Safety
 * The three slot arrays must hold `n` elements, `weights` three, and `out`
 * must be valid for writes.
 */
enum WpStatus wp_pr_wp_bmr(const uint32_t *regions,
                           const double *pixel_areas,
                           const bool *matched,
                           size_t n,
                           const double *weights,
                           double *out);

/**
 * Loads a model saved as JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` valid for writes.
 */
enum WpStatus wp_model_from_json(const char *json, struct WpModel **out);

/**
 * Fits a model on a panel given as CSV text. Any error raised by the fit
 * itself is reported as `EstimationFailed`.
 *
 * # Safety
 * `csv` must be a NUL-terminated string and `out` valid for writes.
 */
enum WpStatus wp_model_estimate_csv(const char *csv,
                                    bool use_lasso,
                                    uint64_t seed,
                                    struct WpModel **out);

/**
 * Serializes a model. Release the string with [`wp_string_free`].
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum WpStatus wp_model_to_json(const struct WpModel *model, char **out);

/**
 * Number of surrogate features the model scores.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum WpStatus wp_model_n_surrogates(const struct WpModel *model, size_t *out);

/**
 * Downstream value of a surrogate vector of length `n`.
 *
 * # Safety
 * `model` must be a live handle, `x` must hold `n` values and `out` must be
 * valid for writes.
 */
enum WpStatus wp_model_score(const struct WpModel *model, const double *x, size_t n, double *out);

/**
 * Region weights implied by a model over the three region brand-match
 * surrogates, written to `out` as top, middle, bottom.
 *
 * # Safety
 * `model` must be a live handle and `out` must hold three values.
 */
enum WpStatus wp_model_region_weights(const struct WpModel *model, double *out);

/**
 * # Safety
 * `model` must be null or a live handle; it is invalid afterwards.
 */
void wp_model_free(struct WpModel *model);

/**
 * Builds a ranker from a serialized bundle.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` valid for writes.
 */
enum WpStatus wp_ranker_from_json(const char *json, struct WpRanker **out);

/**
 * Picks a template for `request_json` (`{"context": .., "candidates": [..]}`)
 * and writes `{"template_id", "chosen", "trace"}` JSON to `out`. The draw is
 * a pure function of `seed` and `event_id`.
 *
 * # Safety
 * `ranker` must be a live handle, `request_json` a NUL-terminated string and
 * `out` valid for writes.
 */
enum WpStatus wp_ranker_select(const struct WpRanker *ranker,
                               const char *request_json,
                               uint64_t seed,
                               uint64_t event_id,
                               char **out);

/**
 * # Safety
 * `ranker` must be null or a live handle; it is invalid afterwards.
 */
void wp_ranker_free(struct WpRanker *ranker);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WHOLEPAGE_H */
