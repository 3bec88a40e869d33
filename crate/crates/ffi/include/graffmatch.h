/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef GRAFFMATCH_H
#define GRAFFMATCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  GM_METRIC_GRAFF = 0,
  GM_METRIC_GRAFF_NAIVE = 1,
  GM_METRIC_CENTROID = 2,
  GM_METRIC_CP = 3,
} GmMetric;

typedef enum {
  GM_STATUS_OK = 0,
  GM_STATUS_NULL_POINTER = 1,
  GM_STATUS_INVALID_ARGUMENT = 2,
  GM_STATUS_IO = 3,
  GM_STATUS_PARSE = 4,
  GM_STATUS_VALIDATION = 5,
  GM_STATUS_DEGENERATE = 6,
  GM_STATUS_UNDEFINED_CP = 7,
  GM_STATUS_MISSING_ATTRIBUTE = 8,
  GM_STATUS_EMPTY_SET = 9,
  GM_STATUS_INTERNAL = 99,
} GmStatus;

/**
 * Opaque landmark set.
 */
typedef struct GmLandmarkSet GmLandmarkSet;

/**
 * Opaque matching outcome.
 */
typedef struct GmMatchResult GmMatchResult;

typedef struct {
  double epsilon;
  double sigma;
  double rho;
  GmMetric metric;
  /**
   * Seed of the solver's initialization.
   */
  uint64_t seed;
} GmMatchConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into this library on the same thread.
 */
const char *gm_last_error_message(void);

/**
 * Default gate, falloff and scaling for `metric`.
 */
GmMatchConfig gm_match_config_default(GmMetric metric);

/**
 * Creates an empty set. `label` may be null.
 *
 * # Safety
 * `label` must be null or a NUL-terminated string; `out` must be writable.
 */
GmStatus gm_landmark_set_new(const char *label, GmLandmarkSet **out);

/**
 * Reads a landmark-set JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
GmStatus gm_landmark_set_load(const char *path, GmLandmarkSet **out);

/**
 * Parses a landmark set from a JSON string.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
GmStatus gm_landmark_set_from_json(const char *json, GmLandmarkSet **out);

/**
 * Writes `set` as JSON to `path`.
 *
 * # Safety
 * `set` must be a live handle and `path` a NUL-terminated string.
 */
GmStatus gm_landmark_set_save(const GmLandmarkSet *set, const char *path);

/**
 * Appends a line with direction `direction[3]` through `point[3]`.
 * `centroid` may be null.
 *
 * # Safety
 * `set` must be a live handle; array arguments must hold 3 doubles.
 */
GmStatus gm_landmark_set_add_line(GmLandmarkSet *set,
                                  uint64_t id,
                                  const double *direction,
                                  const double *point,
                                  const double *centroid);

/**
 * Appends the plane `normalᵀx = d`. `centroid` may be null.
 *
 * # Safety
 * `set` must be a live handle; array arguments must hold 3 doubles.
 */
GmStatus gm_landmark_set_add_plane(GmLandmarkSet *set,
                                   uint64_t id,
                                   const double *normal,
                                   double d,
                                   const double *centroid);

/**
 * Number of landmarks; 0 for a null handle.
 *
 * # Safety
 * `set` must be null or a live handle.
 */
size_t gm_landmark_set_len(const GmLandmarkSet *set);

/**
 * # Safety
 * `set` must be null or a handle not yet freed.
 */
void gm_landmark_set_free(GmLandmarkSet *set);

/**
 * `d_Graff` between landmark `id_a` of `a` and landmark `id_b` of `b`.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
GmStatus gm_landmark_distance(const GmLandmarkSet *a,
                              uint64_t id_a,
                              const GmLandmarkSet *b,
                              uint64_t id_b,
                              double rho,
                              double *out);

/**
 * Matches `a` against `b`. A degenerate registration still produces a
 * result; [`gm_match_result_transform`] then reports it.
 *
 * # Safety
 * `a`, `b` must be live handles, `config` readable and `out` writable.
 */
GmStatus gm_match(const GmLandmarkSet *a,
                  const GmLandmarkSet *b,
                  const GmMatchConfig *config,
                  GmMatchResult **out);

/**
 * Number of selected correspondences; 0 for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
size_t gm_match_result_len(const GmMatchResult *res);

/**
 * Ids of the `index`-th selected correspondence.
 *
 * # Safety
 * `res` must be a live handle; `id_a` and `id_b` writable.
 */
GmStatus gm_match_result_pair(const GmMatchResult *res,
                              size_t index,
                              uint64_t *id_a,
                              uint64_t *id_b);

/**
 * Estimated transform: `rotation[9]` row-major and `translation[3]`.
 * Returns `GM_STATUS_DEGENERATE` when registration failed.
 *
 * # Safety
 * `res` must be a live handle; outputs must hold 9 and 3 doubles.
 */
GmStatus gm_match_result_transform(const GmMatchResult *res, double *rotation, double *translation);

/**
 * Condition numbers of the rotation and translation solves.
 *
 * # Safety
 * `res` must be a live handle; outputs writable.
 */
GmStatus gm_match_result_kappa(const GmMatchResult *res, double *kappa, double *translation_kappa);

/**
 * Density of the selected set; NaN for a null handle.
 *
 * # Safety
 * `res` must be null or a live handle.
 */
double gm_match_result_density(const GmMatchResult *res);

/**
 * # Safety
 * `res` must be null or a handle not yet freed.
 */
void gm_match_result_free(GmMatchResult *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAFFMATCH_H */
