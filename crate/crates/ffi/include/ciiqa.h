#ifndef CIIQA_H
#define CIIQA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CiiqaStatus {
  CIIQA_STATUS_OK = 0,
  CIIQA_STATUS_NULL_ARG = 1,
  CIIQA_STATUS_IO = 2,
  CIIQA_STATUS_DIMENSION = 3,
  CIIQA_STATUS_CONFIG = 4,
  CIIQA_STATUS_FORMAT = 5,
  CIIQA_STATUS_LAYOUT = 6,
  CIIQA_STATUS_DEGENERATE = 7,
  CIIQA_STATUS_PANIC = 8,
} CiiqaStatus;

/**
 * Pooled, scaled feature vector of one image.
 */
typedef struct CiiqaFeature CiiqaFeature;

/**
 * Decoded 8-bit RGB image.
 */
typedef struct CiiqaImage CiiqaImage;

/**
 * Pipeline parameters. `window` is 0 for center-surround normalization or
 * the odd single-window size (3, 5, 7).
 */
typedef struct CiiqaParams {
  double k1;
  double k2;
  double cr_threshold;
  double sigma_floor;
  uint32_t window;
  bool include_approximation;
} CiiqaParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Defaults of the reference operating point (K1 = 31, K2 = 3, threshold
 * 0.25, center-surround).
 */
struct CiiqaParams ciiqa_params_default(void);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ciiqa_last_error(void);

/**
 * Decodes a PNG or BMP file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a writable pointer.
 */
enum CiiqaStatus ciiqa_image_load(const char *path, struct CiiqaImage **out);

/**
 * Wraps `width * height` packed RGB triplets (row-major) in a new image.
 *
 * # Safety
 * `rgb` must point to `3 * width * height` readable bytes and `out` must be
 * writable.
 */
enum CiiqaStatus ciiqa_image_from_rgb(const uint8_t *rgb,
                                      size_t width,
                                      size_t height,
                                      struct CiiqaImage **out);

/**
 * Width in pixels, 0 for null.
 *
 * # Safety
 * `img` must be null or a live handle.
 */
size_t ciiqa_image_width(const struct CiiqaImage *img);

/**
 * Height in pixels, 0 for null.
 *
 * # Safety
 * `img` must be null or a live handle.
 */
size_t ciiqa_image_height(const struct CiiqaImage *img);

/**
 * # Safety
 * `img` must be null or a handle not yet freed.
 */
void ciiqa_image_free(struct CiiqaImage *img);

/**
 * Scores `dist` against `reference`. `params` may be null for defaults.
 * `out_colorful`, if non-null, receives 1 when the color-adapted scaling
 * branch was used.
 *
 * # Safety
 * Handles must be live; `out_e` writable; `out_colorful` null or writable.
 */
enum CiiqaStatus ciiqa_score_pair(const struct CiiqaImage *reference,
                                  const struct CiiqaImage *dist,
                                  const struct CiiqaParams *params,
                                  double *out_e,
                                  int32_t *out_colorful);

/**
 * Builds the feature vector of one image, scaled under the branch its own
 * color ratio selects.
 *
 * # Safety
 * `img` must be live, `params` null or valid, `out` writable.
 */
enum CiiqaStatus ciiqa_feature_build(const struct CiiqaImage *img,
                                     const struct CiiqaParams *params,
                                     struct CiiqaFeature **out);

/**
 * Number of values, 0 for null.
 *
 * # Safety
 * `f` must be null or a live handle.
 */
size_t ciiqa_feature_len(const struct CiiqaFeature *f);

/**
 * Borrowed pointer to the values; valid while the handle lives.
 *
 * # Safety
 * `f` must be null or a live handle.
 */
const double *ciiqa_feature_values(const struct CiiqaFeature *f);

/**
 * L1 distance between two feature vectors of identical layout.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum CiiqaStatus ciiqa_feature_l1(const struct CiiqaFeature *a,
                                  const struct CiiqaFeature *b,
                                  double *out);

/**
 * # Safety
 * `f` must be null or a handle not yet freed.
 */
void ciiqa_feature_free(struct CiiqaFeature *f);

/**
 * Evaluates a `ref,dist,mos,tag` manifest and returns the correlation report
 * as JSON in `*out_json`, to be released with [`ciiqa_string_free`].
 *
 * # Safety
 * `manifest` must be nul-terminated, `params` null or valid, `out_json`
 * writable.
 */
enum CiiqaStatus ciiqa_evaluate_manifest(const char *manifest,
                                         const struct CiiqaParams *params,
                                         uint32_t jobs,
                                         char **out_json);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void ciiqa_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CIIQA_H */
