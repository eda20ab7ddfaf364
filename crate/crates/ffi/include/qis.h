#ifndef QIS_FFI_H
#define QIS_FFI_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Sensor kind selector for [`qis_sensor_new`].
 */
typedef enum QisSensorKind {
  QIS_SENSOR_KIND_QIS = 0,
  QIS_SENSOR_KIND_CIS = 1,
} QisSensorKind;

/**
 * Result code of every fallible call.
 */
typedef enum QisStatus {
  QIS_STATUS_OK = 0,
  QIS_STATUS_NULL_POINTER = 1,
  QIS_STATUS_INVALID_ARGUMENT = 2,
  QIS_STATUS_DIMENSION = 3,
  QIS_STATUS_NUMERIC = 4,
  QIS_STATUS_IO = 5,
  QIS_STATUS_FORMAT = 6,
  QIS_STATUS_DATA = 7,
  QIS_STATUS_DIVERGENCE = 8,
  QIS_STATUS_BUFFER_TOO_SMALL = 9,
  QIS_STATUS_INTERNAL = 10,
} QisStatus;

/**
 * Opaque raw frame.
 */
typedef struct QisFrame QisFrame;

/**
 * Opaque clean RGB image.
 */
typedef struct QisImage QisImage;

/**
 * Opaque sensor configuration.
 */
typedef struct QisSensor QisSensor;

/**
 * Opaque trained student network.
 */
typedef struct QisStudent QisStudent;

/**
 * Opaque frozen teacher classifier.
 */
typedef struct QisTeacher QisTeacher;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` as a
 * NUL-terminated string. Returns the message length in bytes (excluding the
 * terminator); the copy is truncated when `len` is too small.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t qis_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qis_version(void);

/**
 * Create a sensor with the default parameters of `kind` and unit gain.
 *
 * # Safety
 * `out` must be a valid pointer to write the handle to.
 */
enum QisStatus qis_sensor_new(enum QisSensorKind kind, struct QisSensor **out);

/**
 * # Safety
 * `sensor` must be null or a handle from [`qis_sensor_new`] not yet freed.
 */
void qis_sensor_free(struct QisSensor *sensor);

/**
 * Override the numeric sensor parameters. Negative values leave a field
 * unchanged; `adc_bits` of 0 leaves the bit depth unchanged.
 *
 * # Safety
 * `sensor` must be a live sensor handle.
 */
enum QisStatus qis_sensor_set(struct QisSensor *sensor,
                              double gain_alpha,
                              double read_noise_sigma,
                              uint8_t adc_bits,
                              double prnu_strength,
                              uint64_t prnu_seed);

/**
 * Current gain of a sensor.
 *
 * # Safety
 * `sensor` must be a live sensor handle and `out` writable.
 */
enum QisStatus qis_sensor_gain(const struct QisSensor *sensor, double *out);

/**
 * Set the sensor gain so that `images` average `ppp` photons per pixel.
 *
 * # Safety
 * `sensor` must be live; `images` must point to `n` live image handles.
 */
enum QisStatus qis_sensor_calibrate(struct QisSensor *sensor,
                                    const struct QisImage *const *images,
                                    size_t n,
                                    double ppp);

/**
 * Build an image from `width*height*3` interleaved RGB floats in `[0, 1]`.
 *
 * # Safety
 * `data` must point to `len` floats; `out` must be writable.
 */
enum QisStatus qis_image_new(size_t width,
                             size_t height,
                             const float *data,
                             size_t len,
                             struct QisImage **out);

/**
 * Read a binary PPM (P6) image.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum QisStatus qis_image_read_ppm(const char *path, struct QisImage **out);

/**
 * # Safety
 * `image` must be null or a live image handle.
 */
void qis_image_free(struct QisImage *image);

/**
 * Simulate one raw frame. PRNU is applied when the sensor's strength is
 * positive.
 *
 * # Safety
 * `image` and `sensor` must be live handles; `out` must be writable.
 */
enum QisStatus qis_simulate_frame(const struct QisImage *image,
                                  const struct QisSensor *sensor,
                                  uint64_t seed,
                                  struct QisFrame **out);

/**
 * # Safety
 * `frame` must be null or a live frame handle.
 */
void qis_frame_free(struct QisFrame *frame);

/**
 * Frame width, height and ADC ceiling `2^bits - 1`.
 *
 * # Safety
 * `frame` must be live; the output pointers must be writable.
 */
enum QisStatus qis_frame_dims(const struct QisFrame *frame,
                              size_t *width,
                              size_t *height,
                              uint32_t *max_level);

/**
 * Copy the row-major counts into `buf`, which must hold `width*height` values.
 *
 * # Safety
 * `frame` must be live; `buf` must point to `len` writable values.
 */
enum QisStatus qis_frame_counts(const struct QisFrame *frame, uint16_t *buf, size_t len);

/**
 * Write a frame in the `QRF1` raw format.
 *
 * # Safety
 * `frame` must be live; `path` must be a NUL-terminated string.
 */
enum QisStatus qis_frame_write_qrf(const struct QisFrame *frame, const char *path);

/**
 * Read a `QRF1` raw frame.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum QisStatus qis_frame_read_qrf(const char *path, struct QisFrame **out);

/**
 * Estimate photons per pixel from `n` frames (dark-current corrected).
 *
 * # Safety
 * `frames` must point to `n` live frame handles; `out` must be writable.
 */
enum QisStatus qis_measure_ppp(const struct QisFrame *const *frames, size_t n, double *out);

/**
 * Load a teacher checkpoint (frozen).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum QisStatus qis_teacher_load(const char *path, struct QisTeacher **out);

/**
 * # Safety
 * `teacher` must be null or a live teacher handle.
 */
void qis_teacher_free(struct QisTeacher *teacher);

/**
 * Number of classes a teacher predicts.
 *
 * # Safety
 * `teacher` must be live; `out` must be writable.
 */
enum QisStatus qis_teacher_classes(const struct QisTeacher *teacher, size_t *out);

/**
 * Classify a clean image. `probs` may be null; otherwise it must hold at
 * least `len` >= class-count floats.
 *
 * # Safety
 * Handles must be live; `probs` null or `len` writable floats; `class` writable.
 */
enum QisStatus qis_teacher_classify(const struct QisTeacher *teacher,
                                    const struct QisImage *image,
                                    float *probs,
                                    size_t len,
                                    size_t *class_);

/**
 * Load a student checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum QisStatus qis_student_load(const char *path, struct QisStudent **out);

/**
 * # Safety
 * `student` must be null or a live student handle.
 */
void qis_student_free(struct QisStudent *student);

/**
 * Classify a raw frame with a student.
 *
 * # Safety
 * Handles must be live; `probs` null or `len` writable floats; `class` writable.
 */
enum QisStatus qis_student_classify(const struct QisStudent *student,
                                    const struct QisFrame *frame,
                                    float *probs,
                                    size_t len,
                                    size_t *class_);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QIS_FFI_H */
