#ifndef KOOPDAMP_H
#define KOOPDAMP_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum KdStatus {
  KD_STATUS_OK = 0,
  KD_STATUS_NULL_POINTER = 1,
  KD_STATUS_INVALID_ARGUMENT = 2,
  KD_STATUS_CONFIG = 3,
  KD_STATUS_IO = 4,
  KD_STATUS_NUMERICAL = 5,
  KD_STATUS_MODE_NOT_FOUND = 6,
  KD_STATUS_CALIBRATION = 7,
  KD_STATUS_CONTROLLER_FAULT = 8,
  KD_STATUS_INSUFFICIENT_DATA = 9,
  KD_STATUS_BUFFER_TOO_SMALL = 10,
  KD_STATUS_PANIC = 11,
} KdStatus;

/**
 * Which block of a trajectory to copy.
 */
typedef enum KdSeries {
  /**
   * `len` values.
   */
  KD_SERIES_TIMES = 0,
  /**
   * `4 len` values, row-major, set-point detrended.
   */
  KD_SERIES_STATES = 1,
  /**
   * `4 len` values, row-major, W/m^3.
   */
  KD_SERIES_INPUTS = 2,
  /**
   * `4 len` values, row-major, deg.C.
   */
  KD_SERIES_PROBE_TEMPS = 3,
} KdSeries;

/**
 * Observable dictionary.
 */
typedef enum KdDictionary {
  KD_DICTIONARY_LINEAR = 0,
  KD_DICTIONARY_CUBIC_MONOMIAL = 1,
} KdDictionary;

typedef struct KdController KdController;

typedef struct KdEigenfunction KdEigenfunction;

typedef struct KdScenario KdScenario;

typedef struct KdSpectrum KdSpectrum;

typedef struct KdTrajectory KdTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated, truncated to
 * `len`) and returns the full message length excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t kd_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *kd_version(void);

/**
 * The built-in room scenario.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum KdStatus kd_scenario_default(struct KdScenario **out);

/**
 * Scenario from TOML text; omitted keys take their defaults.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid handle slot.
 */
enum KdStatus kd_scenario_from_toml(const char *toml, struct KdScenario **out);

/**
 * Sampling period `h` of the scenario, s.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum KdStatus kd_scenario_sample_period(const struct KdScenario *scenario, double *out);

/**
 * # Safety
 * `scenario` must be null or a handle from this library, not yet freed.
 */
void kd_scenario_free(struct KdScenario *scenario);

/**
 * Open-loop run when `controller` is null, closed-loop otherwise.
 *
 * # Safety
 * `scenario` must be a live handle, `controller` null or a live handle, `out` a valid slot.
 */
enum KdStatus kd_simulate(const struct KdScenario *scenario,
                          struct KdController *controller,
                          struct KdTrajectory **out);

/**
 * Number of samples.
 *
 * # Safety
 * `traj` must be a live handle.
 */
size_t kd_trajectory_len(const struct KdTrajectory *traj);

/**
 * Copies a series into `buf` of capacity `cap` doubles.
 *
 * # Safety
 * `traj` must be a live handle and `buf` point to `cap` writable doubles.
 */
enum KdStatus kd_trajectory_copy(const struct KdTrajectory *traj,
                                 enum KdSeries series,
                                 double *buf,
                                 size_t cap);

/**
 * `(integral over [0, t_end] of u_channel^2 dt)^(1/2)`.
 *
 * # Safety
 * `traj` must be a live handle and `out` valid.
 */
enum KdStatus kd_trajectory_energy_norm(const struct KdTrajectory *traj,
                                        size_t channel,
                                        double t_end,
                                        double *out);

/**
 * # Safety
 * `traj` must be null or a handle from this library, not yet freed.
 */
void kd_trajectory_free(struct KdTrajectory *traj);

/**
 * EDMD over the records with `t0 <= t <= t1`, detrended as the scenario specifies.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum KdStatus kd_fit(const struct KdScenario *scenario,
                     const struct KdTrajectory *traj,
                     enum KdDictionary dictionary,
                     double t0,
                     double t1,
                     double svd_tolerance,
                     struct KdSpectrum **out);

/**
 * # Safety
 * `spectrum` must be a live handle.
 */
size_t kd_spectrum_len(const struct KdSpectrum *spectrum);

/**
 * Continuous-time eigenvalue `nu_j`, 1/s.
 *
 * # Safety
 * `spectrum` must be a live handle and `re`, `im` valid.
 */
enum KdStatus kd_spectrum_eigenvalue(const struct KdSpectrum *spectrum,
                                     size_t j,
                                     double *re,
                                     double *im);

/**
 * Least-damped mode with period in `[period_min_s, period_max_s]` and `|Re nu| <= max_damping`.
 *
 * # Safety
 * `spectrum` must be a live handle and `out` valid.
 */
enum KdStatus kd_spectrum_select_mode(const struct KdSpectrum *spectrum,
                                      double period_min_s,
                                      double period_max_s,
                                      double max_damping,
                                      struct KdEigenfunction **out);

/**
 * # Safety
 * `spectrum` must be null or a handle from this library, not yet freed.
 */
void kd_spectrum_free(struct KdSpectrum *spectrum);

/**
 * `phi(x)` for a state of dimension `n`.
 *
 * # Safety
 * `ef` must be a live handle, `x` point to `n` doubles, `re` and `im` be valid.
 */
enum KdStatus kd_eigenfunction_eval(const struct KdEigenfunction *ef,
                                    const double *x,
                                    size_t n,
                                    double *re,
                                    double *im);

/**
 * Eigenvalue `nu` of the eigenfunction, 1/s.
 *
 * # Safety
 * `ef` must be a live handle and `re`, `im` valid.
 */
enum KdStatus kd_eigenfunction_eigenvalue(const struct KdEigenfunction *ef, double *re, double *im);

/**
 * # Safety
 * `ef` must be null or a handle from this library, not yet freed.
 */
void kd_eigenfunction_free(struct KdEigenfunction *ef);

/**
 * Damping controller with identity input matrix. The eigenfunction is copied.
 *
 * # Safety
 * `ef` must be a live handle and `out` valid.
 */
enum KdStatus kd_controller_new(const struct KdEigenfunction *ef,
                                double d,
                                double u_max,
                                double phi_floor,
                                struct KdController **out);

/**
 * Clamped feedback input `u(x)`; `x` has 4 entries and `u` room for 4.
 *
 * # Safety
 * `ctrl` must be a live handle, `x` point to 4 doubles and `u` to 4 writable doubles.
 */
enum KdStatus kd_controller_input(const struct KdController *ctrl, const double *x, double *u);

/**
 * # Safety
 * `ctrl` must be null or a handle from this library, not yet freed.
 */
void kd_controller_free(struct KdController *ctrl);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KOOPDAMP_H */
