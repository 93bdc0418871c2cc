/* C interface to the zerophase library. Generated by cbindgen; do not edit. */

#ifndef ZEROPHASE_H
#define ZEROPHASE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  /**
   * Frequency-invariant `V`.
   */
  ZP_CONVENTION_V = 0,
  /**
   * Time-invariant `W = e^{2 pi i omega x} V`.
   */
  ZP_CONVENTION_W = 1,
} ZpConvention;

typedef enum {
  ZP_DIRECTION_DX = 0,
  ZP_DIRECTION_DOMEGA = 1,
} ZpDirection;

typedef enum {
  ZP_METHOD_RATIO = 0,
  ZP_METHOD_CARTESIAN = 1,
  ZP_METHOD_UNWRAP = 2,
} ZpMethod;

typedef enum {
  ZP_NOISE_KIND_CIRCULAR_COMPLEX = 0,
  ZP_NOISE_KIND_ANALYTIC = 1,
} ZpNoiseKind;

/**
 * Result of every fallible call.
 */
typedef enum {
  ZP_STATUS_OK = 0,
  ZP_STATUS_NULL_POINTER = 1,
  ZP_STATUS_INVALID_PARAMETER = 2,
  ZP_STATUS_UNSUPPORTED = 3,
  ZP_STATUS_IO = 4,
  ZP_STATUS_NUMERICAL = 5,
  ZP_STATUS_PANIC = 6,
} ZpStatus;

typedef enum {
  ZP_VARIANT_G = 0,
  ZP_VARIANT_NEG_DG = 1,
  ZP_VARIANT_MG = 2,
  ZP_VARIANT_D2G = 3,
  ZP_VARIANT_M2G = 4,
} ZpVariant;

typedef enum {
  ZP_WINDOW_FAMILY_GAUSSIAN = 0,
  ZP_WINDOW_FAMILY_HAMMING = 1,
  ZP_WINDOW_FAMILY_RECTANGULAR = 2,
} ZpWindowFamily;

typedef struct ZpPhaseGrad ZpPhaseGrad;

typedef struct ZpSignal ZpSignal;

typedef struct ZpStftGrid ZpStftGrid;

typedef struct ZpZeroList ZpZeroList;

/**
 * Window description. `width_s` is sigma for the Gaussian and the total
 * length for Hamming and rectangular windows.
 */
typedef struct {
  ZpWindowFamily family;
  double width_s;
} ZpWindow;

/**
 * Lattice parameters. `fft_size == 0` selects the default length and a
 * non-positive `truncation_radius` the default radius.
 */
typedef struct {
  size_t hop_samples;
  size_t fft_size;
  double truncation_radius;
} ZpGridParams;

/**
 * One analysed zero. Fields that were not computed (unclassified zeros)
 * hold NaN.
 */
typedef struct {
  double x_s;
  double omega_hz;
  double residual;
  double det;
  /**
   * +1 or -1.
   */
  int32_t det_sign;
  bool interior;
  bool degenerate;
  bool classified;
  bool pattern_ok;
  double slope_below;
  double slope_above;
  double slope_left;
  double slope_right;
  double c;
  double c_prime;
} ZpZero;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *zp_version(void);

/**
 * Copy the calling thread's last error message into `buf` (truncated and
 * NUL-terminated when `len > 0`). Returns the full message length
 * excluding the terminator, or 0 when no error has been recorded.
 *
 * # Safety
 * `buf` must be NULL or point to `len` writable bytes.
 */
size_t zp_last_error_message(char *buf, size_t len);

/**
 * Forget the calling thread's last error.
 */
void zp_clear_error(void);

/**
 * Wrap `n` complex samples. `im` may be NULL for a real signal.
 *
 * # Safety
 * `re` (and `im` when non-NULL) must point to `n` readable doubles; `out`
 * must be a valid pointer to receive the handle.
 */
ZpStatus zp_signal_from_samples(const double *re,
                                const double *im,
                                size_t n,
                                double sample_rate_hz,
                                ZpSignal **out);

/**
 * `e^{2 pi i f1 t} + e^{2 pi i f2 t}`.
 *
 * # Safety
 * `out` must be a valid pointer to receive the handle.
 */
ZpStatus zp_signal_two_tone(double f1_hz,
                            double f2_hz,
                            double sample_rate_hz,
                            double duration_s,
                            ZpSignal **out);

/**
 * # Safety
 * `out` must be a valid pointer to receive the handle.
 */
ZpStatus zp_signal_pure_tone(double f0_hz,
                             double sample_rate_hz,
                             double duration_s,
                             ZpSignal **out);

/**
 * Seeded white Gaussian noise.
 *
 * # Safety
 * `out` must be a valid pointer to receive the handle.
 */
ZpStatus zp_signal_noise(double variance,
                         ZpNoiseKind kind,
                         uint64_t seed,
                         double sample_rate_hz,
                         double duration_s,
                         ZpSignal **out);

/**
 * Number of samples, or 0 for NULL.
 *
 * # Safety
 * `signal` must be NULL or a live handle.
 */
size_t zp_signal_len(const ZpSignal *signal);

/**
 * # Safety
 * `signal` must be NULL or a handle not yet freed.
 */
void zp_signal_free(ZpSignal *signal);

/**
 * STFT of `signal` on a lattice, for one window variant.
 *
 * # Safety
 * Pointer arguments must be valid; `out` receives the handle.
 */
ZpStatus zp_stft(const ZpSignal *signal,
                 const ZpWindow *window,
                 ZpVariant variant_,
                 const ZpGridParams *params,
                 ZpConvention convention_,
                 ZpStftGrid **out);

/**
 * # Safety
 * `grid` must be a live handle; `n_freq` and `n_time` writable.
 */
ZpStatus zp_grid_dims(const ZpStftGrid *grid, size_t *n_freq, size_t *n_time);

/**
 * Copy coefficients row-major (one row per frequency bin) into `re` and
 * `im`, each holding at least `n_freq * n_time` doubles.
 *
 * # Safety
 * `re` and `im` must point to `len` writable doubles.
 */
ZpStatus zp_grid_copy_coeffs(const ZpStftGrid *grid, double *re, double *im, size_t len);

/**
 * Copy the time axis (seconds) and frequency axis (Hz).
 *
 * # Safety
 * `times` must hold `n_time` and `freqs` `n_freq` writable doubles.
 */
ZpStatus zp_grid_copy_axes(const ZpStftGrid *grid,
                           double *times,
                           size_t n_time,
                           double *freqs,
                           size_t n_freq);

/**
 * # Safety
 * `grid` must be NULL or a handle not yet freed.
 */
void zp_grid_free(ZpStftGrid *grid);

/**
 * Phase derivative along `direction` (rad/s or rad/Hz). Cells with
 * `|V| < threshold_rel * max|V|` are masked.
 *
 * # Safety
 * Pointer arguments must be valid; `out` receives the handle.
 */
ZpStatus zp_phasegrad(const ZpSignal *signal,
                      const ZpWindow *window,
                      const ZpGridParams *params,
                      ZpConvention convention_,
                      ZpDirection direction,
                      ZpMethod method,
                      double threshold_rel,
                      ZpPhaseGrad **out);

/**
 * # Safety
 * `pg` must be a live handle; `n_freq` and `n_time` writable.
 */
ZpStatus zp_phasegrad_dims(const ZpPhaseGrad *pg, size_t *n_freq, size_t *n_time);

/**
 * Copy values (NaN where masked) and the mask (1 = valid) row-major.
 * `mask` may be NULL.
 *
 * # Safety
 * `values` (and `mask` when non-NULL) must hold `len` writable elements.
 */
ZpStatus zp_phasegrad_copy(const ZpPhaseGrad *pg, double *values, uint8_t *mask, size_t len);

/**
 * # Safety
 * `pg` must be NULL or a handle not yet freed.
 */
void zp_phasegrad_free(ZpPhaseGrad *pg);

/**
 * Detect, refine and classify the zeros of the Gaussian STFT of `signal`
 * with default options.
 *
 * # Safety
 * Pointer arguments must be valid; `out` receives the handle.
 */
ZpStatus zp_zeros_analyze(const ZpSignal *signal,
                          const ZpWindow *window,
                          const ZpGridParams *params,
                          ZpZeroList **out);

/**
 * Number of zeros, or 0 for NULL.
 *
 * # Safety
 * `list` must be NULL or a live handle.
 */
size_t zp_zero_list_len(const ZpZeroList *list);

/**
 * # Safety
 * `list` must be a live handle and `out` writable.
 */
ZpStatus zp_zero_list_get(const ZpZeroList *list, size_t index, ZpZero *out);

/**
 * # Safety
 * `list` must be NULL or a handle not yet freed.
 */
void zp_zero_list_free(ZpZeroList *list);

/**
 * Closed-form STFT of `e^{2 pi i f1 t} + e^{2 pi i f2 t}` with a Gaussian
 * window of width `sigma_s`, without the window gain `sigma sqrt(2)`.
 *
 * # Safety
 * `re` and `im` must be writable.
 */
ZpStatus zp_two_tone_stft(double f1_hz,
                          double f2_hz,
                          double sigma_s,
                          double x_s,
                          double omega_hz,
                          ZpConvention convention_,
                          double *re,
                          double *im);

/**
 * `rho(v) = 1 / (2 (1 + v^2)^{3/2})`.
 */
double zp_rho_density(double v);

double zp_rho_cdf(double v);

/**
 * Maximum-likelihood scale of `rho` for `n` samples and the KS distance
 * of the scaled samples.
 *
 * # Safety
 * `samples` must point to `n` readable doubles; `scale` and `ks` writable.
 */
ZpStatus zp_fit_rho(const double *samples, size_t n, double *scale, double *ks);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ZEROPHASE_H */
