#ifndef NFIMAGING_H
#define NFIMAGING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum NfiStatus {
  NFI_STATUS_OK = 0,
  NFI_STATUS_NULL_POINTER = 1,
  NFI_STATUS_INVALID_UTF8 = 2,
  NFI_STATUS_INVALID_ARGUMENT = 3,
  NFI_STATUS_CONFIG = 4,
  NFI_STATUS_IO = 5,
  NFI_STATUS_NUMERICAL = 6,
  NFI_STATUS_SHAPE_MISMATCH = 7,
  NFI_STATUS_FORMAT = 8,
  NFI_STATUS_BUFFER_TOO_SMALL = 9,
  NFI_STATUS_PANIC = 10,
} NfiStatus;

/**
 * Parsed and validated configuration.
 */
typedef struct NfiConfig NfiConfig;

/**
 * Reconstructed magnitudes plus their score against the ground truth.
 */
typedef struct NfiImage NfiImage;

typedef struct NfiMetrics {
  double mse;
  double psnr;
  double ssim;
  double pcc;
} NfiMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parse a TOML config held in a NUL-terminated string.
 *
 * # Safety
 * `toml` must be a valid NUL-terminated string and `out` a writable pointer.
 */
enum NfiStatus nfi_config_from_str(const char *toml, struct NfiConfig **out);

/**
 * Parse a TOML config file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a writable pointer.
 */
enum NfiStatus nfi_config_from_file(const char *path, struct NfiConfig **out);

/**
 * # Safety
 * `cfg` must come from `nfi_config_from_*` and not be used afterwards. Null
 * is ignored.
 */
void nfi_config_free(struct NfiConfig *cfg);

/**
 * Simulate and reconstruct the first cell of the config's sweep with the
 * given seed. Planar scenes give a rows × cols image, voxel scenes a
 * cells × 1 column of magnitudes.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` a writable pointer.
 */
enum NfiStatus nfi_run_cell(const struct NfiConfig *cfg, uint64_t seed, struct NfiImage **out);

/**
 * # Safety
 * `img` must be a live image handle; `rows` and `cols` writable pointers.
 */
enum NfiStatus nfi_image_shape(const struct NfiImage *img, size_t *rows, size_t *cols);

/**
 * Copy the row-major magnitudes into `buf`, which must hold rows × cols
 * values.
 *
 * # Safety
 * `img` must be a live image handle and `buf` valid for `len` writes.
 */
enum NfiStatus nfi_image_copy(const struct NfiImage *img, double *buf, size_t len);

/**
 * Metrics of the reconstruction against the scene's ground truth.
 *
 * # Safety
 * `img` must be a live image handle and `out` a writable pointer.
 */
enum NfiStatus nfi_image_metrics(const struct NfiImage *img, struct NfiMetrics *out);

/**
 * # Safety
 * `img` must come from `nfi_run_cell` and not be used afterwards. Null is
 * ignored.
 */
void nfi_image_free(struct NfiImage *img);

/**
 * Metrics of two equally long magnitude vectors, each scaled to unit max.
 *
 * # Safety
 * `reference` and `estimate` must be valid for `len` reads; `out` writable.
 */
enum NfiStatus nfi_metrics(const double *reference,
                           const double *estimate,
                           size_t len,
                           struct NfiMetrics *out);

/**
 * Copy the calling thread's last error message into `buf` (truncated and
 * NUL-terminated). Returns the full message length excluding the NUL, so a
 * caller can size a buffer with `nfi_last_error_message(NULL, 0) + 1`.
 *
 * # Safety
 * `buf` must be valid for `len` writes, or null with `len` = 0.
 */
size_t nfi_last_error_message(char *buf, size_t len);

/**
 * Static name of a status code.
 */
const char *nfi_status_name(enum NfiStatus status);

/**
 * Library version as a static string.
 */
const char *nfi_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NFIMAGING_H */
