#ifndef HORIZONKIT_H
#define HORIZONKIT_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HkStatus {
  HK_STATUS_OK = 0,
  HK_STATUS_NULL_POINTER = 1,
  HK_STATUS_INVALID_INPUT = 2,
  HK_STATUS_DEGENERATE_PROJECTION = 3,
  HK_STATUS_VERTICAL_HORIZON = 4,
  HK_STATUS_DEGENERATE_MODEL = 5,
  HK_STATUS_INSUFFICIENT_CAMERAS = 6,
  HK_STATUS_INSUFFICIENT_DATA = 7,
  HK_STATUS_DEGENERATE_BINS = 8,
  HK_STATUS_MISSING_EXTERNAL_GRID = 9,
  HK_STATUS_DEGENERATE_DISTRIBUTION = 10,
  HK_STATUS_MISSING_PREDICTION = 11,
  HK_STATUS_PARSE = 12,
  HK_STATUS_IO = 13,
  HK_STATUS_BUFFER_TOO_SMALL = 14,
  HK_STATUS_PANIC = 15,
} HkStatus;

typedef struct HkLabelSpace HkLabelSpace;

typedef struct HkSfmModel HkSfmModel;

typedef struct HkSubwindowSet HkSubwindowSet;

typedef struct HkLine {
  double h[3];
} HkLine;

typedef struct HkFrame {
  uint32_t width;
  uint32_t height;
} HkFrame;

/**
 * Every parameterization of one line.
 */
typedef struct HkLineViews {
  double theta;
  double rho;
  double left;
  double right;
  double y_left_px;
  double y_right_px;
} HkLineViews;

/**
 * Axis-aligned window in full-image pixels, origin top-left.
 */
typedef struct HkWindow {
  double x;
  double y;
  double width;
  double height;
} HkWindow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *hk_last_error_message(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *hk_version(void);

/**
 * Line from normal angle `theta` and offset `rho`.
 */
enum HkStatus hk_line_from_slope_offset(double theta, double rho, struct HkLine *out);

/**
 * Line through the left and right border heights, in image heights.
 */
enum HkStatus hk_line_from_left_right(double left,
                                      double right,
                                      struct HkFrame image,
                                      struct HkLine *out);

/**
 * Line through the pixel rows where it meets the left and right borders.
 */
enum HkStatus hk_line_from_pixel_endpoints(double y_left,
                                           double y_right,
                                           struct HkFrame image,
                                           struct HkLine *out);

enum HkStatus hk_line_views(struct HkLine l, struct HkFrame image, struct HkLineViews *out);

/**
 * Horizon seen by a camera with the given tilt and roll (radians) and focal length (pixels).
 */
enum HkStatus hk_horizon_from_tilt_roll(double tilt,
                                        double roll,
                                        double focal_px,
                                        struct HkFrame image,
                                        struct HkLine *out);

enum HkStatus hk_tilt_roll_from_horizon(struct HkLine l,
                                        double focal_px,
                                        struct HkFrame image,
                                        double *tilt,
                                        double *roll);

/**
 * Re-expresses a line given in window `from` in the coordinates of window `to`.
 */
enum HkStatus hk_transfer_horizon(struct HkLine l,
                                  struct HkWindow from,
                                  struct HkWindow to,
                                  struct HkFrame image,
                                  struct HkLine *out);

/**
 * Writes the standard crop grid (center square first) into `out`, which
 * must hold `capacity` windows. `count` receives the number of windows.
 */
enum HkStatus hk_crop_grid(struct HkFrame image,
                           struct HkWindow *out,
                           size_t capacity,
                           size_t *count);

/**
 * Maximum vertical distance between two lines across the image, in image heights.
 */
enum HkStatus hk_horizon_error(struct HkLine predicted,
                               struct HkLine truth,
                               struct HkFrame image,
                               double *out);

/**
 * Area under the cumulative error curve up to `max_threshold`, in [0, 1].
 */
enum HkStatus hk_auc(const double *errors, size_t count, double max_threshold, double *out);

/**
 * Fraction of `errors` at or below `threshold`.
 */
enum HkStatus hk_fraction_within(const double *errors, size_t count, double threshold, double *out);

enum HkStatus hk_label_space_read(const char *path_utf8, struct HkLabelSpace **out);

/**
 * Label space with `n` quantile bins per axis, built from `count` lines
 * expressed in square windows.
 */
enum HkStatus hk_label_space_from_lines(const struct HkLine *lines,
                                        size_t count,
                                        size_t n,
                                        struct HkLabelSpace **out);

enum HkStatus hk_label_space_dimensions(const struct HkLabelSpace *space,
                                        size_t *theta_bins,
                                        size_t *rho_bins);

/**
 * Row-major cell index (theta major) of a line.
 */
enum HkStatus hk_label_space_cell(const struct HkLabelSpace *space,
                                  struct HkLine l,
                                  size_t *theta_bin,
                                  size_t *rho_bin);

void hk_label_space_free(struct HkLabelSpace *space);

enum HkStatus hk_subwindow_set_new(struct HkFrame image, struct HkSubwindowSet **out);

/**
 * Adds one subwindow's probability grid (row-major, theta major, summing
 * to one) over `space`.
 */
enum HkStatus hk_subwindow_set_add(struct HkSubwindowSet *set,
                                   const struct HkLabelSpace *space,
                                   const double *probabilities,
                                   size_t count,
                                   struct HkWindow win);

enum HkStatus hk_subwindow_set_len(const struct HkSubwindowSet *set, size_t *out);

/**
 * Confidence-weighted average of the subwindow estimates, in full-image coordinates.
 */
enum HkStatus hk_aggregate_average(const struct HkSubwindowSet *set, struct HkLine *out);

/**
 * Joint negative log-likelihood minimizer; `objective` may be null.
 */
enum HkStatus hk_aggregate_nll(const struct HkSubwindowSet *set,
                               struct HkLine *out,
                               double *objective);

void hk_subwindow_set_free(struct HkSubwindowSet *set);

/**
 * Reads a reconstruction in JSON or text form.
 */
enum HkStatus hk_sfm_model_read(const char *path_utf8, struct HkSfmModel **out);

enum HkStatus hk_sfm_model_len(const struct HkSfmModel *model, size_t *out);

/**
 * Robust world zenith of a reconstruction; `inliers` may be null.
 */
enum HkStatus hk_sfm_estimate_zenith(const struct HkSfmModel *model,
                                     double *zenith,
                                     size_t *inliers);

/**
 * Horizon label of camera `index` under the model's estimated zenith.
 * Fails with `HK_STATUS_INVALID_INPUT` for cameras rejected as outliers.
 */
enum HkStatus hk_sfm_camera_horizon(const struct HkSfmModel *model,
                                    size_t index,
                                    struct HkLine *out,
                                    struct HkFrame *image);

void hk_sfm_model_free(struct HkSfmModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HORIZONKIT_H */
