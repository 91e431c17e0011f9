#ifndef SEMIOCCAM_H
#define SEMIOCCAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes returned by every fallible function.
typedef enum SoStatus {
  SO_STATUS_OK = 0,
  SO_STATUS_NULL_POINTER = 1,
  SO_STATUS_INVALID_ARGUMENT = 2,
  SO_STATUS_IO = 3,
  SO_STATUS_FORMAT = 4,
  SO_STATUS_NUMERICAL = 5,
  SO_STATUS_INTERNAL = 6,
  SO_STATUS_BUFFER_TOO_SMALL = 7,
} SoStatus;

// Feature rows held on the Rust side.
typedef struct SoFeatures SoFeatures;

// A fitted mixture classifier.
typedef struct SoModel SoModel;

// A fitted PCA projection.
typedef struct SoPca SoPca;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The
// pointer stays valid until the next failing call on this thread.
const char *so_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *so_version(void);

// Copies `n * d` row-major values into a new feature handle.
//
// # Safety
// `values` must point to `n * d` readable doubles; `out` must be writable.
enum SoStatus so_features_from_values(const double *values,
                                      size_t n,
                                      size_t d,
                                      struct SoFeatures **out);

// Reads a feature file into a new handle.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SoStatus so_features_read(const char *path, struct SoFeatures **out);

// Writes the rows and columns of `features` to `n` and `d`.
//
// # Safety
// `features` must be a live handle; `n` and `d` must be writable.
enum SoStatus so_features_shape(const struct SoFeatures *features, size_t *n, size_t *d);

// Copies all values, row-major, into `buf` of capacity `len` doubles.
//
// # Safety
// `features` must be a live handle; `buf` must have room for `len` doubles.
enum SoStatus so_features_copy(const struct SoFeatures *features, double *buf, size_t len);

// Releases a feature handle. Null is ignored.
//
// # Safety
// `features` must be null or a handle not yet freed.
void so_features_free(struct SoFeatures *features);

// Loads a saved PCA projection.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SoStatus so_pca_read(const char *path, struct SoPca **out);

// Projects `features` into a new handle.
//
// # Safety
// Both handles must be live; `out` must be writable.
enum SoStatus so_pca_transform(const struct SoPca *pca_model,
                               const struct SoFeatures *features,
                               struct SoFeatures **out);

// Releases a PCA handle. Null is ignored.
//
// # Safety
// `pca_model` must be null or a handle not yet freed.
void so_pca_free(struct SoPca *pca_model);

// Loads a saved mixture classifier.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SoStatus so_model_read(const char *path, struct SoModel **out);

// Number of classes the model predicts.
//
// # Safety
// `model` must be a live handle; `n_classes` must be writable.
enum SoStatus so_model_n_classes(const struct SoModel *model, size_t *n_classes);

// Writes one class id (1-based) per row of `features` into `classes`,
// which must hold at least `len` entries.
//
// # Safety
// Both handles must be live; `classes` must have room for `len` values.
enum SoStatus so_model_predict(const struct SoModel *model,
                               const struct SoFeatures *features,
                               uint32_t *classes,
                               size_t len);

// Writes class posteriors, row-major `n x K`, into `proba` of capacity
// `len` doubles.
//
// # Safety
// Both handles must be live; `proba` must have room for `len` doubles.
enum SoStatus so_model_predict_proba(const struct SoModel *model,
                                     const struct SoFeatures *features,
                                     double *proba,
                                     size_t len);

// Releases a model handle. Null is ignored.
//
// # Safety
// `model` must be null or a handle not yet freed.
void so_model_free(struct SoModel *model);

// SHA-256 of an image given as `height x width x channels` bytes, written
// to the 32-byte buffer `digest`.
//
// # Safety
// `pixels` must point to `width * height * channels` readable bytes;
// `digest` must have room for 32 bytes.
enum SoStatus so_hash_image(const uint8_t *pixels,
                            size_t width,
                            size_t height,
                            size_t channels,
                            uint8_t *digest);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEMIOCCAM_H */
