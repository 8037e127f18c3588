//! Long-run variance estimation via difference-of-partial-sums statistics.
//!
//! For block length `w` the statistic `Delta_j(t)` compares the partial sum
//! of `X_{j-w+1..j}` with that of `X_{j+1..j+w}`; smooth trends cancel in
//! the difference, so the estimator works on the raw data.

use crate::error::{Error, Result};
use crate::kernels::kernel_h;
use crate::series::{EvalGrid, FunctionalSeries};

/// Parameters of the long-run variance estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrvParams {
    /// Block length, at least 2.
    pub w: usize,
    /// Smoothing bandwidth in (0, 1).
    pub tau: f64,
}

impl LrvParams {
    pub fn new(w: usize, tau: f64) -> Result<Self> {
        if w < 2 {
            return Err(Error::Parameter(format!("block length w = {w} must be >= 2")));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Parameter(format!(
                "smoothing bandwidth tau = {tau} must lie in (0, 1)"
            )));
        }
        Ok(Self { w, tau })
    }

    pub fn validate_for(&self, n: usize) -> Result<()> {
        if 3 * self.w > n {
            return Err(Error::Parameter(format!(
                "block length w = {} exceeds n/3 for n = {n}",
                self.w
            )));
        }
        Ok(())
    }
}

/// Recommended defaults `w = floor(n^{2/7})`, `tau = n^{-1/7}`.
pub fn default_lrv_params(n: usize) -> Result<LrvParams> {
    if n < 27 {
        return Err(Error::Parameter(format!(
            "sample size n = {n} too small for default LRV parameters (need n >= 27)"
        )));
    }
    // Guard against powf landing a hair below an exact integer power.
    let w = ((n as f64).powf(2.0 / 7.0) + 1e-9).floor() as usize;
    let tau = (n as f64).powf(-1.0 / 7.0);
    LrvParams::new(w, tau)
}

/// Long-run variance field evaluable at arbitrary `(u, t_k)`.
///
/// Caches `w Delta_j^2 / 2` per column; evaluation then weighs the cached
/// terms with normalized Epanechnikov weights in `u`. The field is constant
/// in `u` on `[0, w/n]` and `[1 - w/n, 1]`.
pub struct LrvField {
    n: usize,
    p: usize,
    params: LrvParams,
    /// `w * Delta_j^2 / 2` for j = w..n-w (1-based), row-major by j.
    terms: Vec<f64>,
}

impl LrvField {
    pub fn new(series: &FunctionalSeries, params: LrvParams) -> Result<Self> {
        params.validate_for(series.n())?;
        let n = series.n();
        let p = series.p();
        let w = params.w;
        // Prefix sums per column: pre[i][k] = sum of rows 1..=i.
        let mut pre = vec![0.0f64; (n + 1) * p];
        for i in 0..n {
            let row = series.row(i);
            for k in 0..p {
                pre[(i + 1) * p + k] = pre[i * p + k] + row[k];
            }
        }
        let nj = n - 2 * w + 1;
        let mut terms = vec![0.0f64; nj * p];
        let wf = w as f64;
        for (jj, j) in (w..=n - w).enumerate() {
            for k in 0..p {
                // S_{j-w+1,w} - S_{j+1,w}, each scaled by 1/sqrt(w).
                let left = pre[j * p + k] - pre[(j - w) * p + k];
                let right = pre[(j + w) * p + k] - pre[j * p + k];
                let delta = (left - right) / wf; // (1/sqrt(w)) * diff / sqrt(w)
                terms[jj * p + k] = wf * delta * delta / 2.0;
            }
        }
        Ok(Self { n, p, params, terms })
    }

    pub fn params(&self) -> LrvParams {
        self.params
    }

    /// `sigma_hat^2(u, t_k)` for the column with 0-based index `t_index`.
    pub fn estimate(&self, u: f64, t_index: usize) -> Result<f64> {
        let weights = self.weights(u)?;
        let mut acc = 0.0;
        for (jj, &wt) in weights.iter().enumerate() {
            acc += wt * self.terms[jj * self.p + t_index];
        }
        Ok(acc)
    }

    /// All columns at once, sharing the weight computation.
    pub fn estimate_row(&self, u: f64) -> Result<Vec<f64>> {
        let weights = self.weights(u)?;
        let mut out = vec![0.0; self.p];
        for (jj, &wt) in weights.iter().enumerate() {
            if wt == 0.0 {
                continue;
            }
            let row = &self.terms[jj * self.p..(jj + 1) * self.p];
            for (slot, &v) in out.iter_mut().zip(row.iter()) {
                *slot += wt * v;
            }
        }
        Ok(out)
    }

    /// Field on an evaluation grid, row-major `u x t`.
    pub fn field(&self, grid: &EvalGrid, series: &FunctionalSeries) -> Result<Vec<f64>> {
        let t_idx: Vec<usize> = grid
            .t_values
            .iter()
            .map(|&t| column_index(series, t))
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(grid.len());
        for &u in &grid.u_values {
            let row = self.estimate_row(u)?;
            for &k in &t_idx {
                out.push(row[k]);
            }
        }
        Ok(out)
    }

    /// `sigma_hat(i/n, t_k)` at every design point, row-major `n x p`.
    pub fn design_sigma(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.n * self.p);
        for i in 0..self.n {
            let row = self.estimate_row((i + 1) as f64 / self.n as f64)?;
            out.extend(row.into_iter().map(f64::sqrt));
        }
        Ok(out)
    }

    /// Normalized Epanechnikov weights over the valid index set
    /// `J = {w, ..., n-w}`, with the boundary clamp in `u`.
    fn weights(&self, u: f64) -> Result<Vec<f64>> {
        let n = self.n as f64;
        let w = self.params.w;
        let lo_u = w as f64 / n;
        let hi_u = 1.0 - lo_u;
        let u = u.clamp(lo_u, hi_u);
        let nj = self.n - 2 * w + 1;
        let mut weights = Vec::with_capacity(nj);
        let mut total = 0.0;
        for j in w..=self.n - w {
            let h = kernel_h((j as f64 / n - u) / self.params.tau);
            weights.push(h);
            total += h;
        }
        if total < 1e-300 {
            return Err(Error::Parameter(format!(
                "empty LRV weight sum at u = {u}: tau = {} too small for the grid",
                self.params.tau
            )));
        }
        for wgt in weights.iter_mut() {
            *wgt /= total;
        }
        Ok(weights)
    }
}

fn column_index(series: &FunctionalSeries, t: f64) -> Result<usize> {
    let (a, b) = series.domain();
    let p = series.p();
    let k = ((t - a) / (b - a) * p as f64).round() as isize - 1;
    if k < 0 || k >= p as isize || (series.t_at(k as usize) - t).abs() > 1e-9 {
        return Err(Error::Grid(format!(
            "t = {t} is not a spatial grid point of the series"
        )));
    }
    Ok(k as usize)
}
