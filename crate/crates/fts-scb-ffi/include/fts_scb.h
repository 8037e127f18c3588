/* C interface for the fts-scb confidence surface library. */

#ifndef FTS_SCB_H
#define FTS_SCB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum FtsStatus {
  /**
   * Success.
   */
  Ok = 0,
  /**
   * A required pointer argument was null.
   */
  NullPointer = 1,
  /**
   * Invalid parameter or evaluation grid.
   */
  InvalidParameter = 2,
  /**
   * I/O or data error.
   */
  DataError = 3,
  /**
   * Numerical failure (degenerate residuals, bandwidth too small, ...).
   */
  NumericalError = 4,
  /**
   * Internal panic; the handle state is unchanged.
   */
  Internal = 5,
} FtsStatus;

/**
 * Opaque confidence band handle.
 */
typedef struct FtsBand FtsBand;

/**
 * Opaque functional time series handle.
 */
typedef struct FtsSeries FtsSeries;

/**
 * Opaque confidence surface handle.
 */
typedef struct FtsSurface FtsSurface;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message into `buf` (truncated, always
 * NUL-terminated). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to at least `len` writable bytes.
 */
uintptr_t fts_last_error_message(char *buf, uintptr_t len);

/**
 * Load a functional series from CSV on the space domain `[a, b]`.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out` a valid pointer.
 */
enum FtsStatus fts_series_load_csv(const char *path,
                                   double domain_a,
                                   double domain_b,
                                   struct FtsSeries **out);

/**
 * Build a series from a row-major `n x p` array on the domain `[a, b]`.
 *
 * # Safety
 * `data` must point to `n * p` readable doubles.
 */
enum FtsStatus fts_series_from_data(const double *data,
                                    uintptr_t n,
                                    uintptr_t p,
                                    double domain_a,
                                    double domain_b,
                                    struct FtsSeries **out);

/**
 * Number of curves (rows).
 *
 * # Safety
 * `series` must be a live handle.
 */
uintptr_t fts_series_n(const struct FtsSeries *series);

/**
 * Number of spatial points (columns).
 *
 * # Safety
 * `series` must be a live handle.
 */
uintptr_t fts_series_p(const struct FtsSeries *series);

/**
 * Destroy a series handle. Null is a no-op.
 *
 * # Safety
 * `series` must come from this library and not be used afterwards.
 */
void fts_series_free(struct FtsSeries *series);

/**
 * Constant-width simultaneous confidence surface (the full-grid
 * estimator evaluated on the interior design points).
 *
 * # Safety
 * `series` must be a live handle, `out` a valid pointer.
 */
enum FtsStatus fts_surface_constant(const struct FtsSeries *series,
                                    double b_n,
                                    double d_n,
                                    uintptr_t m_n,
                                    double alpha,
                                    uintptr_t b_reps,
                                    uint64_t seed,
                                    struct FtsSurface **out);

/**
 * Varying-width surface. Pass `w = 0` and `tau = 0` to use the default
 * long-run variance parameters.
 *
 * # Safety
 * `series` must be a live handle, `out` a valid pointer.
 */
enum FtsStatus fts_surface_varying(const struct FtsSeries *series,
                                   double b_n,
                                   double d_n,
                                   uintptr_t m_n,
                                   uintptr_t w,
                                   double tau,
                                   double alpha,
                                   uintptr_t b_reps,
                                   uint64_t seed,
                                   struct FtsSurface **out);

/**
 * Surface grid dimensions.
 *
 * # Safety
 * Pointers must be valid; `surface` a live handle.
 */
enum FtsStatus fts_surface_dims(const struct FtsSurface *surface, uintptr_t *n_u, uintptr_t *n_t);

/**
 * Copy surface contents. Any output pointer may be null to skip that
 * field; non-null buffers must hold `n_u * n_t` doubles (`n_u` and `n_t`
 * for the grid vectors).
 *
 * # Safety
 * Buffers must be adequately sized as described above.
 */
enum FtsStatus fts_surface_copy(const struct FtsSurface *surface,
                                double *u_values,
                                double *t_values,
                                double *center,
                                double *lower,
                                double *upper);

/**
 * Write a surface to CSV (`u,t,center,lower,upper`).
 *
 * # Safety
 * `surface` must be a live handle; `path` NUL-terminated.
 */
enum FtsStatus fts_surface_save_csv(const struct FtsSurface *surface, const char *path);

/**
 * Destroy a surface handle. Null is a no-op.
 *
 * # Safety
 * `surface` must come from this library and not be used afterwards.
 */
void fts_surface_free(struct FtsSurface *surface);

/**
 * Confidence band over rescaled time with the spatial point fixed at
 * column `t_index` (0-based). `varying_width != 0` selects the
 * variance-adjusted band; `w = 0, tau = 0` uses default LRV parameters.
 *
 * # Safety
 * `series` must be a live handle, `out` a valid pointer.
 */
enum FtsStatus fts_band_fixed_t(const struct FtsSeries *series,
                                uintptr_t t_index,
                                double b_n,
                                double d_n,
                                uintptr_t m_n,
                                uintptr_t w,
                                double tau,
                                double alpha,
                                uintptr_t b_reps,
                                int32_t varying_width,
                                uint64_t seed,
                                struct FtsBand **out);

/**
 * Confidence band over space with rescaled time fixed at `u_star`.
 *
 * # Safety
 * `series` must be a live handle, `out` a valid pointer.
 */
enum FtsStatus fts_band_fixed_u(const struct FtsSeries *series,
                                double u_star,
                                double b_n,
                                double d_n,
                                uintptr_t m_n,
                                uintptr_t w,
                                double tau,
                                double alpha,
                                uintptr_t b_reps,
                                int32_t varying_width,
                                uint64_t seed,
                                struct FtsBand **out);

/**
 * Number of evaluation points in a band.
 *
 * # Safety
 * `band` must be a live handle.
 */
uintptr_t fts_band_len(const struct FtsBand *band);

/**
 * Copy band contents; null output pointers skip fields. Non-null buffers
 * must hold `fts_band_len` doubles.
 *
 * # Safety
 * Buffers must be adequately sized.
 */
enum FtsStatus fts_band_copy(const struct FtsBand *band,
                             double *grid,
                             double *center,
                             double *lower,
                             double *upper);

/**
 * Write a band to CSV.
 *
 * # Safety
 * `band` must be a live handle; `path` NUL-terminated.
 */
enum FtsStatus fts_band_save_csv(const struct FtsBand *band, const char *path);

/**
 * Destroy a band handle. Null is a no-op.
 *
 * # Safety
 * `band` must come from this library and not be used afterwards.
 */
void fts_band_free(struct FtsBand *band);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FTS_SCB_H */
