//! Kernel estimators: the Nadaraya-Watson surface estimator and the
//! local-linear detrender producing nonparametric residuals.

use crate::error::{Error, Result};
use crate::kernels::{kernel_h, kernel_k};
use crate::series::{EvalGrid, FunctionalSeries};

/// Nonparametric residuals from a local-linear fit, aligned with the rows
/// of the source series.
#[derive(Debug, Clone)]
pub struct ResidualMatrix {
    pub n: usize,
    pub p: usize,
    pub values: Vec<f64>, // row-major n x p
    pub d_n: f64,
}

impl ResidualMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.values[i * self.p + k]).collect()
    }
}

/// Nadaraya-Watson estimate of the mean surface on an evaluation grid.
///
/// Uses the unnormalized form `(1/(n b_n)) sum_i X_i(t_k) K(((i/n)-u)/b_n)`;
/// the bootstrap radius constants assume exactly this scaling. Returns a
/// row-major `u x t` matrix.
pub fn nw_estimate(
    series: &FunctionalSeries,
    b_n: f64,
    grid: &EvalGrid,
) -> Result<Vec<f64>> {
    grid.check_interior(b_n)?;
    let n = series.n();
    let half_window = (n as f64 * b_n).ceil() as usize;
    if 2 * half_window < 4 {
        return Err(Error::Parameter(format!(
            "window 2*ceil(n b_n) = {} too small for estimation",
            2 * half_window
        )));
    }
    let t_idx = spatial_indices(series, &grid.t_values)?;
    let nb = n as f64 * b_n;
    let pt = grid.t_values.len();
    let mut out = vec![0.0; grid.u_values.len() * pt];
    for (iu, &u) in grid.u_values.iter().enumerate() {
        // Only rows with |i/n - u| < b_n contribute.
        let lo = ((u - b_n) * n as f64).ceil().max(1.0) as usize;
        let hi = (((u + b_n) * n as f64).floor() as usize).min(n);
        let row_out = &mut out[iu * pt..(iu + 1) * pt];
        for i in lo..=hi {
            let wk = kernel_k((i as f64 / n as f64 - u) / b_n);
            if wk == 0.0 {
                continue;
            }
            let row = series.row(i - 1);
            for (slot, &k) in row_out.iter_mut().zip(t_idx.iter()) {
                *slot += wk * row[k];
            }
        }
        for v in row_out.iter_mut() {
            *v /= nb;
        }
    }
    Ok(out)
}

/// Map requested t-values onto the series' spatial columns.
fn spatial_indices(series: &FunctionalSeries, t_values: &[f64]) -> Result<Vec<usize>> {
    let (a, b) = series.domain();
    let p = series.p();
    let mut idx = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let k = ((t - a) / (b - a) * p as f64).round() as isize - 1;
        if k < 0 || k >= p as isize || (series.t_at(k as usize) - t).abs() > 1e-9 {
            return Err(Error::Grid(format!(
                "t = {t} is not a spatial grid point of the series"
            )));
        }
        idx.push(k as usize);
    }
    Ok(idx)
}

/// Local-linear fit at all design points `u = i/n`, per column.
///
/// Returns the fitted matrix and the residual matrix `X - fitted`.
pub fn local_linear_fit(
    series: &FunctionalSeries,
    d_n: f64,
) -> Result<(Vec<f64>, ResidualMatrix)> {
    let weights = LocalLinearWeights::new(series.n(), d_n)?;
    let n = series.n();
    let p = series.p();
    let mut fitted = vec![0.0; n * p];
    for i in 0..n {
        let w = weights.row(i);
        let out = &mut fitted[i * p..(i + 1) * p];
        for (j, &lw) in (w.lo..=w.hi).zip(w.coeffs.iter()) {
            if lw == 0.0 {
                continue;
            }
            let row = series.row(j);
            for (slot, &x) in out.iter_mut().zip(row.iter()) {
                *slot += lw * x;
            }
        }
    }
    let residuals: Vec<f64> = series
        .values()
        .iter()
        .zip(fitted.iter())
        .map(|(x, f)| x - f)
        .collect();
    Ok((
        fitted,
        ResidualMatrix {
            n,
            p,
            values: residuals,
            d_n,
        },
    ))
}

/// Closed-form local-linear smoother weights at the design points.
///
/// At `u = i/n` the fitted value is `sum_j L_i(j) X_j` with
/// `L_i(j) = w_j (S2 - S1 x_j) / (S0 S2 - S1^2)`, `x_j = j/n - u` and
/// `w_j = H(x_j / d_n)`. The weights depend only on the design and the
/// bandwidth, so they are shared by every column.
pub struct LocalLinearWeights {
    rows: Vec<WeightRow>,
}

pub struct WeightRow {
    /// First contributing design index (0-based).
    pub lo: usize,
    /// Last contributing design index (0-based, inclusive).
    pub hi: usize,
    pub coeffs: Vec<f64>,
    /// Weight this row places on its own design point, `L_i(i)`.
    pub diag: f64,
}

impl LocalLinearWeights {
    pub fn new(n: usize, d_n: f64) -> Result<Self> {
        if !d_n.is_finite() || d_n <= 0.0 || d_n >= 1.0 {
            return Err(Error::Parameter(format!(
                "bandwidth d_n = {d_n} must lie in (0, 1)"
            )));
        }
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let u = (i + 1) as f64 / n as f64;
            let lo = (((u - d_n) * n as f64).ceil().max(1.0) as usize).max(1);
            let hi = (((u + d_n) * n as f64).floor() as usize).min(n);
            if hi < lo + 2 {
                return Err(Error::BandwidthTooSmall(format!(
                    "fewer than 3 design points within d_n = {d_n} of u = {u}"
                )));
            }
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            let mut wbuf = Vec::with_capacity(hi - lo + 1);
            for j in lo..=hi {
                let x = j as f64 / n as f64 - u;
                let w = kernel_h(x / d_n);
                wbuf.push((w, x));
                s0 += w;
                s1 += w * x;
                s2 += w * x * x;
            }
            let det = s0 * s2 - s1 * s1;
            // `<=` plus the NaN check preserves the rejection of NaN dets.
            if det.is_nan() || det <= 1e-12 * s0 * s2 {
                return Err(Error::BandwidthTooSmall(format!(
                    "singular local-linear system at u = {u} (relative determinant below 1e-12)"
                )));
            }
            let coeffs: Vec<f64> = wbuf
                .iter()
                .map(|&(w, x)| w * (s2 - s1 * x) / det)
                .collect();
            let diag = coeffs[i + 1 - lo];
            rows.push(WeightRow {
                lo: lo - 1,
                hi: hi - 1,
                coeffs,
                diag,
            });
        }
        Ok(Self { rows })
    }

    pub fn row(&self, i: usize) -> &WeightRow {
        &self.rows[i]
    }

    /// Trace of the hat matrix `Q(d_n)`; identical for every column.
    pub fn trace(&self) -> f64 {
        self.rows.iter().map(|r| r.diag).sum()
    }
}
