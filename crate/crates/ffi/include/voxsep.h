#ifndef VOXSEP_H
#define VOXSEP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Sample rate every audio buffer must use.
 */
#define VOXSEP_SAMPLE_RATE 44100

typedef enum VoxsepStatus {
  VOXSEP_STATUS_OK = 0,
  VOXSEP_STATUS_NULL_POINTER = 1,
  VOXSEP_STATUS_INVALID_ARGUMENT = 2,
  VOXSEP_STATUS_IO = 3,
  VOXSEP_STATUS_FORMAT = 4,
  VOXSEP_STATUS_DIMENSION = 5,
  VOXSEP_STATUS_SAMPLE_RATE = 6,
  VOXSEP_STATUS_NUMERIC = 7,
  VOXSEP_STATUS_BUFFER_TOO_SMALL = 8,
  VOXSEP_STATUS_PANIC = 9,
} VoxsepStatus;

typedef enum VoxsepVariant {
  VOXSEP_VARIANT_NRI = 0,
  VOXSEP_VARIANT_RIS_S = 1,
  VOXSEP_VARIANT_RIS_L = 2,
} VoxsepVariant;

/*
 A loaded model with its run configuration.
 */
typedef struct VoxsepSeparator VoxsepSeparator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Loads a checkpoint file and stores a new handle in `*out`.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VoxsepStatus voxsep_separator_load(const char *path, struct VoxsepSeparator **out);

/*
 Releases a handle. Null is ignored.

 # Safety
 `sep` must come from [`voxsep_separator_load`] and not be used afterwards.
 */
void voxsep_separator_free(struct VoxsepSeparator *sep);

/*
 Selects the decoder variant used by later separations.

 # Safety
 `sep` must be a live handle.
 */
enum VoxsepStatus voxsep_separator_set_variant(struct VoxsepSeparator *sep,
                                               enum VoxsepVariant variant);

/*
 Separates the voice from a mono mixture.

 Writes `len` samples to `output`, which must hold `output_capacity`
 floats. When `mean_ri_iterations` is non-null it receives the average
 number of recurrent-inference iterations.

 # Safety
 `sep` must be a live handle; `input` must hold `len` floats and `output`
 `output_capacity` floats.
 */
enum VoxsepStatus voxsep_separate(const struct VoxsepSeparator *sep,
                                  const float *input,
                                  size_t len,
                                  uint32_t sample_rate,
                                  float *output,
                                  size_t output_capacity,
                                  double *mean_ri_iterations);

/*
 SDR and SIR (dB) of `estimate` against the true voice, with the
 accompaniment as the interfering source. Perfect estimates give
 `+INFINITY`, an all-zero estimate `-INFINITY`.

 # Safety
 The three buffers must hold `len` floats; `sdr` and `sir` must be valid.
 */
enum VoxsepStatus voxsep_sdr_sir(const float *estimate,
                                 const float *voice,
                                 const float *accompaniment,
                                 size_t len,
                                 size_t filter_len,
                                 double *sdr,
                                 double *sir);

/*
 Description of the last failure on this thread, or null. The pointer is
 valid until the next call into this library from the same thread.
 */
const char *voxsep_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *voxsep_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOXSEP_H */
