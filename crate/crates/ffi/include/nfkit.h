#ifndef NFKIT_H
#define NFKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NfStatus {
  NF_STATUS_OK = 0,
  NF_STATUS_INVALID_ARGUMENT = 1,
  NF_STATUS_NUMERICAL_FAILURE = 2,
  NF_STATUS_NULL_POINTER = 3,
  NF_STATUS_BUFFER_TOO_SMALL = 4,
  NF_STATUS_PANIC = 5,
} NfStatus;

typedef enum NfRegion {
  NF_REGION_REACTIVE_NEAR = 0,
  NF_REGION_RADIATING_NEAR = 1,
  NF_REGION_FAR = 2,
} NfRegion;

typedef enum NfApprox {
  NF_APPROX_LINEAR = 0,
  NF_APPROX_PARABOLIC = 1,
} NfApprox;

/**
 * Opaque antenna array.
 */
typedef struct NfArray NfArray;

/**
 * Summary of a positioning Monte Carlo run.
 */
typedef struct NfPositioningSummary {
  double cep_m;
  double mean_x_m;
  double mean_y_m;
} NfPositioningSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t nf_last_error_message(char *buf, size_t len);

/**
 * `2·D²/λ`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum NfStatus nf_rayleigh_distance(double aperture_m, double wavelength_m, double *out);

/**
 * `0.62·sqrt(D³/λ)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum NfStatus nf_fresnel_distance(double aperture_m, double wavelength_m, double *out);

/**
 * Field region of `distance_m` for an aperture `aperture_m`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum NfStatus nf_classify_region(double distance_m,
                                 double aperture_m,
                                 double wavelength_m,
                                 enum NfRegion *out);

/**
 * Uniform linear array along x, centered at the origin, facing +z.
 *
 * # Safety
 * `out` must be valid for writes. The handle must be released with
 * [`nf_array_free`].
 */
enum NfStatus nf_array_ula(size_t n, double spacing_m, struct NfArray **out);

/**
 * Uniform planar array in the xy plane, centered at the origin.
 *
 * # Safety
 * `out` must be valid for writes. The handle must be released with
 * [`nf_array_free`].
 */
enum NfStatus nf_array_upa(size_t nx, size_t ny, double spacing_m, struct NfArray **out);

/**
 * Releases an array handle. Null is ignored.
 *
 * # Safety
 * `array` must be null or a handle from an `nf_array_*` constructor that has
 * not been freed.
 */
void nf_array_free(struct NfArray *array);

/**
 * Number of elements.
 *
 * # Safety
 * `array` must be a live handle and `out` valid for writes.
 */
enum NfStatus nf_array_len(const struct NfArray *array, size_t *out);

/**
 * Largest element-to-element distance.
 *
 * # Safety
 * `array` must be a live handle and `out` valid for writes.
 */
enum NfStatus nf_array_aperture(const struct NfArray *array, double *out);

/**
 * Near-field steering vector towards the source `(x, y, z)`, written as
 * separate real and imaginary parts of length `len` (the element count).
 *
 * # Safety
 * `array` must be a live handle; `out_re` and `out_im` valid for `len` writes.
 */
enum NfStatus nf_nearfield_steering(const struct NfArray *array,
                                    double x,
                                    double y,
                                    double z,
                                    double wavelength_m,
                                    bool free_space,
                                    double *out_re,
                                    double *out_im,
                                    size_t len);

/**
 * Largest phase error of the far-field (linear) or Fresnel (parabolic)
 * approximation for a source at `(x, y, z)`. `order` is an [`NfApprox`]
 * value.
 *
 * # Safety
 * `array` must be a live handle and `out` valid for writes.
 */
enum NfStatus nf_max_phase_error(const struct NfArray *array,
                                 double x,
                                 double y,
                                 double z,
                                 double wavelength_m,
                                 uint32_t order,
                                 double *out);

/**
 * Effective DoF of a `rows × cols` complex matrix stored column-major as
 * separate real and imaginary parts.
 *
 * # Safety
 * `re` and `im` must be valid for `rows * cols` reads; `out` for writes.
 */
enum NfStatus nf_effective_dof(const double *re,
                               const double *im,
                               size_t rows,
                               size_t cols,
                               double energy_loss,
                               size_t *out);

/**
 * Circular error probable of `n` planar estimates about their mean.
 *
 * # Safety
 * `xs` and `ys` must be valid for `n` reads; `out` for writes.
 */
enum NfStatus nf_cep(const double *xs, const double *ys, size_t n, double *out);

/**
 * Time-of-arrival positioning in the 6 m square room with four ULA access
 * points of `elements_per_ap` elements, range variance `noise_db_m2`
 * (dB re 1 m²), linearized least-squares fixes.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum NfStatus nf_positioning_experiment(size_t elements_per_ap,
                                        double spacing_m,
                                        double noise_db_m2,
                                        size_t trials,
                                        uint64_t seed,
                                        double user_x_m,
                                        double user_y_m,
                                        struct NfPositioningSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NFKIT_H */
