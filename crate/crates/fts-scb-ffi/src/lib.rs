//! C ABI for the fts-scb library.
//!
//! All objects are opaque handles created and destroyed through this
//! interface. Every fallible call returns an [`FtsStatus`]; on failure the
//! thread-local message retrieved by [`fts_last_error_message`] describes
//! the problem. Passing a null required pointer yields
//! `FTS_STATUS_NULL_POINTER`; handles must not be used after `free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use fts_scb::bands::{band_fixed_t, band_fixed_u};
use fts_scb::bootstrap::{surface_constant, surface_varying};
use fts_scb::error::Error;
use fts_scb::io::{load_series_csv, save_band_csv, save_surface_csv};
use fts_scb::lrv::{default_lrv_params, LrvParams};
use fts_scb::series::{
    ConfidenceBand, ConfidenceSurface, EvalGrid, FunctionalSeries, WidthMode,
};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtsStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Invalid parameter or evaluation grid.
    InvalidParameter = 2,
    /// I/O or data error.
    DataError = 3,
    /// Numerical failure (degenerate residuals, bandwidth too small, ...).
    NumericalError = 4,
    /// Internal panic; the handle state is unchanged.
    Internal = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> FtsStatus {
    match err.exit_code() {
        2 => FtsStatus::InvalidParameter,
        3 => FtsStatus::DataError,
        _ => FtsStatus::NumericalError,
    }
}

fn run<T>(
    out: *mut *mut T,
    f: impl FnOnce() -> Result<T, Error>,
) -> FtsStatus {
    if out.is_null() {
        set_error("output handle pointer is null".into());
        return FtsStatus::NullPointer;
    }
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(value)) => {
            unsafe { *out = Box::into_raw(Box::new(value)) };
            FtsStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            FtsStatus::Internal
        }
    }
}

unsafe fn cstr_path<'a>(ptr: *const c_char) -> Result<&'a Path, FtsStatus> {
    if ptr.is_null() {
        set_error("path pointer is null".into());
        return Err(FtsStatus::NullPointer);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8".into());
            Err(FtsStatus::InvalidParameter)
        }
    }
}

/// Opaque functional time series handle.
pub struct FtsSeries(FunctionalSeries);

/// Opaque confidence surface handle.
pub struct FtsSurface(ConfidenceSurface);

/// Opaque confidence band handle.
pub struct FtsBand(ConfidenceBand);

/// Copy the last error message into `buf` (truncated, always
/// NUL-terminated). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fts_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Load a functional series from CSV on the space domain `[a, b]`.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fts_series_load_csv(
    path: *const c_char,
    domain_a: f64,
    domain_b: f64,
    out: *mut *mut FtsSeries,
) -> FtsStatus {
    let path = match cstr_path(path) {
        Ok(p) => p.to_path_buf(),
        Err(s) => return s,
    };
    run(out, || {
        load_series_csv(&path, (domain_a, domain_b)).map(FtsSeries)
    })
}

/// Build a series from a row-major `n x p` array on the domain `[a, b]`.
///
/// # Safety
/// `data` must point to `n * p` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn fts_series_from_data(
    data: *const f64,
    n: usize,
    p: usize,
    domain_a: f64,
    domain_b: f64,
    out: *mut *mut FtsSeries,
) -> FtsStatus {
    if data.is_null() {
        set_error("data pointer is null".into());
        return FtsStatus::NullPointer;
    }
    let values = std::slice::from_raw_parts(data, n.saturating_mul(p)).to_vec();
    run(out, || {
        FunctionalSeries::new(values, n, p, (domain_a, domain_b)).map(FtsSeries)
    })
}

/// Number of curves (rows).
///
/// # Safety
/// `series` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fts_series_n(series: *const FtsSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.n())
}

/// Number of spatial points (columns).
///
/// # Safety
/// `series` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fts_series_p(series: *const FtsSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.p())
}

/// Destroy a series handle. Null is a no-op.
///
/// # Safety
/// `series` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fts_series_free(series: *mut FtsSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

unsafe fn series_ref<'a>(ptr: *const FtsSeries) -> Result<&'a FunctionalSeries, FtsStatus> {
    match ptr.as_ref() {
        Some(s) => Ok(&s.0),
        None => {
            set_error("series handle is null".into());
            Err(FtsStatus::NullPointer)
        }
    }
}

fn lrv_of(w: usize, tau: f64, n: usize) -> Result<LrvParams, Error> {
    if w == 0 && tau == 0.0 {
        default_lrv_params(n)
    } else {
        LrvParams::new(w, tau)
    }
}

/// Constant-width simultaneous confidence surface (the full-grid
/// estimator evaluated on the interior design points).
///
/// # Safety
/// `series` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fts_surface_constant(
    series: *const FtsSeries,
    b_n: f64,
    d_n: f64,
    m_n: usize,
    alpha: f64,
    b_reps: usize,
    seed: u64,
    out: *mut *mut FtsSurface,
) -> FtsStatus {
    let s = match series_ref(series) {
        Ok(s) => s,
        Err(st) => return st,
    };
    run(out, || {
        let grid = EvalGrid::theory_grid(s, b_n)?;
        surface_constant(s, b_n, d_n, m_n, alpha, b_reps, &grid, seed).map(FtsSurface)
    })
}

/// Varying-width surface. Pass `w = 0` and `tau = 0` to use the default
/// long-run variance parameters.
///
/// # Safety
/// `series` must be a live handle, `out` a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn fts_surface_varying(
    series: *const FtsSeries,
    b_n: f64,
    d_n: f64,
    m_n: usize,
    w: usize,
    tau: f64,
    alpha: f64,
    b_reps: usize,
    seed: u64,
    out: *mut *mut FtsSurface,
) -> FtsStatus {
    let s = match series_ref(series) {
        Ok(s) => s,
        Err(st) => return st,
    };
    run(out, || {
        let grid = EvalGrid::theory_grid(s, b_n)?;
        let lrv = lrv_of(w, tau, s.n())?;
        surface_varying(s, b_n, d_n, m_n, lrv, alpha, b_reps, &grid, seed).map(FtsSurface)
    })
}

/// Surface grid dimensions.
///
/// # Safety
/// Pointers must be valid; `surface` a live handle.
#[no_mangle]
pub unsafe extern "C" fn fts_surface_dims(
    surface: *const FtsSurface,
    n_u: *mut usize,
    n_t: *mut usize,
) -> FtsStatus {
    let Some(s) = surface.as_ref() else {
        set_error("surface handle is null".into());
        return FtsStatus::NullPointer;
    };
    if n_u.is_null() || n_t.is_null() {
        set_error("dimension output pointer is null".into());
        return FtsStatus::NullPointer;
    }
    *n_u = s.0.grid.u_values.len();
    *n_t = s.0.grid.t_values.len();
    FtsStatus::Ok
}

/// Copy surface contents. Any output pointer may be null to skip that
/// field; non-null buffers must hold `n_u * n_t` doubles (`n_u` and `n_t`
/// for the grid vectors).
///
/// # Safety
/// Buffers must be adequately sized as described above.
#[no_mangle]
pub unsafe extern "C" fn fts_surface_copy(
    surface: *const FtsSurface,
    u_values: *mut f64,
    t_values: *mut f64,
    center: *mut f64,
    lower: *mut f64,
    upper: *mut f64,
) -> FtsStatus {
    let Some(s) = surface.as_ref() else {
        set_error("surface handle is null".into());
        return FtsStatus::NullPointer;
    };
    let s = &s.0;
    let cells = s.grid.len();
    if !u_values.is_null() {
        std::ptr::copy_nonoverlapping(s.grid.u_values.as_ptr(), u_values, s.grid.u_values.len());
    }
    if !t_values.is_null() {
        std::ptr::copy_nonoverlapping(s.grid.t_values.as_ptr(), t_values, s.grid.t_values.len());
    }
    if !center.is_null() {
        std::ptr::copy_nonoverlapping(s.center.as_ptr(), center, cells);
    }
    if !lower.is_null() {
        std::ptr::copy_nonoverlapping(s.lower.as_ptr(), lower, cells);
    }
    if !upper.is_null() {
        std::ptr::copy_nonoverlapping(s.upper.as_ptr(), upper, cells);
    }
    FtsStatus::Ok
}

/// Write a surface to CSV (`u,t,center,lower,upper`).
///
/// # Safety
/// `surface` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fts_surface_save_csv(
    surface: *const FtsSurface,
    path: *const c_char,
) -> FtsStatus {
    let Some(s) = surface.as_ref() else {
        set_error("surface handle is null".into());
        return FtsStatus::NullPointer;
    };
    let path = match cstr_path(path) {
        Ok(p) => p.to_path_buf(),
        Err(st) => return st,
    };
    match save_surface_csv(&s.0, &path) {
        Ok(()) => FtsStatus::Ok,
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    }
}

/// Destroy a surface handle. Null is a no-op.
///
/// # Safety
/// `surface` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fts_surface_free(surface: *mut FtsSurface) {
    if !surface.is_null() {
        drop(Box::from_raw(surface));
    }
}

/// Confidence band over rescaled time with the spatial point fixed at
/// column `t_index` (0-based). `varying_width != 0` selects the
/// variance-adjusted band; `w = 0, tau = 0` uses default LRV parameters.
///
/// # Safety
/// `series` must be a live handle, `out` a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn fts_band_fixed_t(
    series: *const FtsSeries,
    t_index: usize,
    b_n: f64,
    d_n: f64,
    m_n: usize,
    w: usize,
    tau: f64,
    alpha: f64,
    b_reps: usize,
    varying_width: i32,
    seed: u64,
    out: *mut *mut FtsBand,
) -> FtsStatus {
    let s = match series_ref(series) {
        Ok(s) => s,
        Err(st) => return st,
    };
    run(out, || {
        let mode = if varying_width != 0 {
            WidthMode::Varying
        } else {
            WidthMode::Constant
        };
        let lrv = if w == 0 && tau == 0.0 {
            None
        } else {
            Some(LrvParams::new(w, tau)?)
        };
        band_fixed_t(s, t_index, b_n, d_n, m_n, alpha, b_reps, mode, seed, lrv).map(FtsBand)
    })
}

/// Confidence band over space with rescaled time fixed at `u_star`.
///
/// # Safety
/// `series` must be a live handle, `out` a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn fts_band_fixed_u(
    series: *const FtsSeries,
    u_star: f64,
    b_n: f64,
    d_n: f64,
    m_n: usize,
    w: usize,
    tau: f64,
    alpha: f64,
    b_reps: usize,
    varying_width: i32,
    seed: u64,
    out: *mut *mut FtsBand,
) -> FtsStatus {
    let s = match series_ref(series) {
        Ok(s) => s,
        Err(st) => return st,
    };
    run(out, || {
        let mode = if varying_width != 0 {
            WidthMode::Varying
        } else {
            WidthMode::Constant
        };
        let lrv = if w == 0 && tau == 0.0 {
            None
        } else {
            Some(LrvParams::new(w, tau)?)
        };
        band_fixed_u(s, u_star, b_n, d_n, m_n, alpha, b_reps, mode, seed, lrv).map(FtsBand)
    })
}

/// Number of evaluation points in a band.
///
/// # Safety
/// `band` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fts_band_len(band: *const FtsBand) -> usize {
    band.as_ref().map_or(0, |b| b.0.grid.len())
}

/// Copy band contents; null output pointers skip fields. Non-null buffers
/// must hold `fts_band_len` doubles.
///
/// # Safety
/// Buffers must be adequately sized.
#[no_mangle]
pub unsafe extern "C" fn fts_band_copy(
    band: *const FtsBand,
    grid: *mut f64,
    center: *mut f64,
    lower: *mut f64,
    upper: *mut f64,
) -> FtsStatus {
    let Some(b) = band.as_ref() else {
        set_error("band handle is null".into());
        return FtsStatus::NullPointer;
    };
    let b = &b.0;
    let len = b.grid.len();
    if !grid.is_null() {
        std::ptr::copy_nonoverlapping(b.grid.as_ptr(), grid, len);
    }
    if !center.is_null() {
        std::ptr::copy_nonoverlapping(b.center.as_ptr(), center, len);
    }
    if !lower.is_null() {
        std::ptr::copy_nonoverlapping(b.lower.as_ptr(), lower, len);
    }
    if !upper.is_null() {
        std::ptr::copy_nonoverlapping(b.upper.as_ptr(), upper, len);
    }
    FtsStatus::Ok
}

/// Write a band to CSV.
///
/// # Safety
/// `band` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fts_band_save_csv(
    band: *const FtsBand,
    path: *const c_char,
) -> FtsStatus {
    let Some(b) = band.as_ref() else {
        set_error("band handle is null".into());
        return FtsStatus::NullPointer;
    };
    let path = match cstr_path(path) {
        Ok(p) => p.to_path_buf(),
        Err(st) => return st,
    };
    match save_band_csv(&b.0, &path) {
        Ok(()) => FtsStatus::Ok,
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    }
}

/// Destroy a band handle. Null is a no-op.
///
/// # Safety
/// `band` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fts_band_free(band: *mut FtsBand) {
    if !band.is_null() {
        drop(Box::from_raw(band));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ffi_round_trip_through_pointers() {
        // Build a series from raw data, compute a surface, copy it out.
        let n = 120usize;
        let p = 3usize;
        let mut data = Vec::with_capacity(n * p);
        let mut state = 0x12345678u64;
        for i in 0..n {
            for _ in 0..p {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                let noise = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                data.push((i as f64 / n as f64) + 0.3 * noise);
            }
        }
        let mut series: *mut FtsSeries = std::ptr::null_mut();
        let st = unsafe {
            fts_series_from_data(data.as_ptr(), n, p, 0.0, 1.0, &mut series)
        };
        assert_eq!(st, FtsStatus::Ok);
        assert_eq!(unsafe { fts_series_n(series) }, n);
        assert_eq!(unsafe { fts_series_p(series) }, p);

        let mut surface: *mut FtsSurface = std::ptr::null_mut();
        let st = unsafe {
            fts_surface_constant(series, 0.2, 0.15, 4, 0.1, 60, 7, &mut surface)
        };
        assert_eq!(st, FtsStatus::Ok);
        let (mut nu, mut nt) = (0usize, 0usize);
        assert_eq!(
            unsafe { fts_surface_dims(surface, &mut nu, &mut nt) },
            FtsStatus::Ok
        );
        assert_eq!(nt, p);
        let mut center = vec![0.0f64; nu * nt];
        let mut lower = vec![0.0f64; nu * nt];
        let mut upper = vec![0.0f64; nu * nt];
        let st = unsafe {
            fts_surface_copy(
                surface,
                std::ptr::null_mut(),
                std::ptr::null_mut(),
                center.as_mut_ptr(),
                lower.as_mut_ptr(),
                upper.as_mut_ptr(),
            )
        };
        assert_eq!(st, FtsStatus::Ok);
        for i in 0..nu * nt {
            assert!(lower[i] < center[i] && center[i] < upper[i]);
        }
        unsafe {
            fts_surface_free(surface);
            fts_series_free(series);
        }
    }

    #[test]
    fn error_paths_set_message() {
        let mut out: *mut FtsSeries = std::ptr::null_mut();
        let st = unsafe {
            fts_series_load_csv(
                c"/nonexistent/file.csv".as_ptr(),
                0.0,
                1.0,
                &mut out,
            )
        };
        assert_eq!(st, FtsStatus::DataError);
        let mut buf = [0i8; 256];
        let len = unsafe { fts_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert!(len > 0);

        // Invalid parameter category.
        let data = [0.0f64; 100];
        let mut series: *mut FtsSeries = std::ptr::null_mut();
        unsafe {
            fts_series_from_data(data.as_ptr(), 100, 1, 0.0, 1.0, &mut series);
        }
        let mut surface: *mut FtsSurface = std::ptr::null_mut();
        let st = unsafe {
            fts_surface_constant(series, 0.7, 0.15, 4, 0.1, 60, 7, &mut surface)
        };
        assert_eq!(st, FtsStatus::InvalidParameter);
        unsafe { fts_series_free(series) };

        // Null handle.
        assert_eq!(
            unsafe { fts_surface_dims(std::ptr::null(), &mut 0, &mut 0) },
            FtsStatus::NullPointer
        );
    }
}
