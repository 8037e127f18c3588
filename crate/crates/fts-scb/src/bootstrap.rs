//! Shared-multiplier block bootstrap for simultaneous confidence surfaces.
//!
//! The bootstrap statistic couples neighbouring local windows through the
//! multiplier index `k + j - 1`: adjacent windows reuse most of their
//! multipliers, mimicking the overlap dependence of the rearranged residual
//! vectors. The rearranged vectors themselves are never materialized; every
//! quantity reduces to the block sums
//! `S(j,k,s) = (1/sqrt(m')) * (first-half - second-half) of A(r) E[r+k-1, s]`
//! which are precomputed with prefix sums per window position.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::kernel_k;
use crate::lrv::{LrvField, LrvParams};
use crate::rng::{stream_rng, Stream};
use crate::series::{
    ConfidenceSurface, EvalGrid, FunctionalSeries, Radius, TuningRecord, WidthMode,
};
use crate::smoothing::{local_linear_fit, nw_estimate, ResidualMatrix};

/// Kernel weight vector `A(r) = K((r - ceil(n b_n)) / (n b_n))`,
/// `r = 1 .. 2 ceil(n b_n) - 1`.
#[derive(Debug, Clone)]
pub struct KernelWeightVector {
    pub n: usize,
    pub b_n: f64,
    /// `ceil(n b_n)`.
    pub half: usize,
    pub weights: Vec<f64>,
}

/// Build the kernel weight vector for sample size `n` and bandwidth `b_n`.
pub fn kernel_weights(n: usize, b_n: f64) -> Result<KernelWeightVector> {
    if !(b_n > 0.0 && b_n < 0.5) {
        return Err(Error::Parameter(format!(
            "bandwidth b_n = {b_n} must lie in (0, 1/2)"
        )));
    }
    let nb = n as f64 * b_n;
    let half = nb.ceil() as usize;
    if half == 0 {
        return Err(Error::Parameter("ceil(n b_n) must be positive".into()));
    }
    let weights = (1..=2 * half - 1)
        .map(|r| kernel_k((r as f64 - half as f64) / nb))
        .collect();
    Ok(KernelWeightVector {
        n,
        b_n,
        half,
        weights,
    })
}

/// Lazy view of the bootstrap block sums over a residual matrix.
///
/// Valid index ranges (0-based): `j < 2 ceil(n b_n) - m'`,
/// `k < n - 2 ceil(n b_n) + 1`, `s < p`. Block sums only ever touch
/// residual rows `1 .. n-1`; the last row is unused.
pub struct BlockSumAccessor {
    pub n: usize,
    pub p: usize,
    /// `ceil(n b_n)`.
    pub half: usize,
    pub m_prime: usize,
    /// Number of window positions `j`.
    pub nj: usize,
    /// Number of shifted copies `k`.
    pub nk: usize,
    /// Precomputed block sums, layout `[k][j][s]`.
    blocks: Vec<f64>,
}

impl BlockSumAccessor {
    /// Precompute all block sums for residuals `e` (row-major `n x p`).
    pub fn new(e: &[f64], n: usize, p: usize, kw: &KernelWeightVector, m_n: usize) -> Result<Self> {
        assert_eq!(e.len(), n * p);
        assert_eq!(kw.n, n);
        let h = m_n / 2;
        let m_prime = 2 * h;
        if m_prime < 2 {
            return Err(Error::Parameter(format!(
                "window m_n = {m_n} yields m' < 2"
            )));
        }
        let half = kw.half;
        let len_a = 2 * half - 1;
        if len_a < m_prime {
            return Err(Error::Parameter(format!(
                "window m' = {m_prime} exceeds the kernel weight vector length {len_a}"
            )));
        }
        if 2 * half - m_prime == 0 {
            return Err(Error::Parameter(
                "2 ceil(n b_n) - m' must be positive; retune the window".into(),
            ));
        }
        if n < 2 * half {
            return Err(Error::Parameter(format!(
                "sample size n = {n} too small for bandwidth window 2 ceil(n b_n) = {}",
                2 * half
            )));
        }
        let nj = 2 * half - m_prime;
        let nk = n - 2 * half + 1;
        let inv_sqrt_m = 1.0 / (m_prime as f64).sqrt();

        let mut blocks = vec![0.0f64; nk * nj * p];
        // Per k: prefix sums over r of A(r) E[r+k-1, s], then
        // block(j) = (2 P[j+h] - P[j] - P[j+m']) / sqrt(m').
        let mut prefix = vec![0.0f64; (len_a + 1) * p];
        for k in 0..nk {
            for r in 0..len_a {
                let a = kw.weights[r];
                let row = &e[(r + k) * p..(r + k + 1) * p];
                let (pre, cur) = prefix.split_at_mut((r + 1) * p);
                let pre = &pre[r * p..];
                for s in 0..p {
                    cur[s] = pre[s] + a * row[s];
                }
            }
            let out = &mut blocks[k * nj * p..(k + 1) * nj * p];
            for j in 0..nj {
                let p_lo = &prefix[j * p..(j + 1) * p];
                let p_mid = &prefix[(j + h) * p..(j + h + 1) * p];
                let p_hi = &prefix[(j + m_prime) * p..(j + m_prime + 1) * p];
                let slot = &mut out[j * p..(j + 1) * p];
                for s in 0..p {
                    slot[s] = inv_sqrt_m * (2.0 * p_mid[s] - p_lo[s] - p_hi[s]);
                }
            }
        }
        Ok(Self {
            n,
            p,
            half,
            m_prime,
            nj,
            nk,
            blocks,
        })
    }

    /// Block sum at 0-based indices `(j, k, s)`.
    pub fn block(&self, j: usize, k: usize, s: usize) -> f64 {
        assert!(j < self.nj && k < self.nk && s < self.p, "block index out of range");
        self.blocks[(k * self.nj + j) * self.p + s]
    }

    /// Number of multipliers a draw consumes: `n - m'`.
    pub fn multiplier_len(&self) -> usize {
        self.n - self.m_prime
    }

    /// One bootstrap draw: `T = max_{k,s} |sum_j block(j,k,s) R_{k+j-1}|`
    /// with the shared multiplier indexing `R_{k+j-1}`.
    pub fn draw_t(&self, multipliers: &[f64]) -> f64 {
        assert_eq!(
            multipliers.len(),
            self.multiplier_len(),
            "multiplier vector length must be n - m'"
        );
        let p = self.p;
        let nj = self.nj;
        let mut t_max = 0.0f64;
        let mut acc = vec![0.0f64; p];
        for k in 0..self.nk {
            acc.iter_mut().for_each(|v| *v = 0.0);
            let kb = &self.blocks[k * nj * p..(k + 1) * nj * p];
            for j in 0..nj {
                let c = multipliers[k + j];
                let row = &kb[j * p..(j + 1) * p];
                for (slot, &b) in acc.iter_mut().zip(row.iter()) {
                    *slot += c * b;
                }
            }
            for &v in &acc {
                let a = v.abs();
                if a > t_max {
                    t_max = a;
                }
            }
        }
        t_max
    }

    /// Mean square of the block sums over `j` per flat coordinate
    /// `(k, s)`, used by the minimal-volatility window selector.
    pub fn mean_square_by_coordinate(&self) -> Vec<f64> {
        let p = self.p;
        let nj = self.nj;
        let mut out = vec![0.0f64; self.nk * p];
        for k in 0..self.nk {
            let kb = &self.blocks[k * nj * p..(k + 1) * nj * p];
            let slot = &mut out[k * p..(k + 1) * p];
            for j in 0..nj {
                let row = &kb[j * p..(j + 1) * p];
                for (o, &b) in slot.iter_mut().zip(row.iter()) {
                    *o += b * b;
                }
            }
            let inv = 1.0 / nj as f64;
            slot.iter_mut().for_each(|v| *v *= inv);
        }
        out
    }
}

/// `B` bootstrap draws with per-replicate derived RNG streams; the result
/// is independent of execution order and worker count.
pub fn bootstrap_draws(accessor: &BlockSumAccessor, b_reps: usize, seed: u64) -> Vec<f64> {
    let len = accessor.multiplier_len();
    (0..b_reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, Stream::BootstrapReplicate, r);
            let mult: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
            accessor.draw_t(&mult)
        })
        .collect()
}

/// Empirical quantile: the 1-based order statistic `floor((1-alpha) B)`,
/// clamped to at least 1.
pub fn bootstrap_quantile(draws: &[f64], alpha: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::Parameter("empty bootstrap sample".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let b = sorted.len();
    let idx = (((1.0 - alpha) * b as f64).floor() as usize).clamp(1, b);
    Ok(sorted[idx - 1])
}

/// Scaling constant `sqrt(2) / (sqrt(n b_n) sqrt(2 ceil(n b_n) - m'))`
/// that converts the bootstrap quantile into a surface half-width.
pub fn radius_scale(n: usize, b_n: f64, half: usize, m_prime: usize) -> f64 {
    let nb = n as f64 * b_n;
    2.0f64.sqrt() / (nb.sqrt() * ((2 * half - m_prime) as f64).sqrt())
}

fn common_checks(b_n: f64, d_n: f64, m_n: usize, alpha: f64, b_reps: usize) -> Result<()> {
    if !(b_n > 0.0 && b_n < 0.5) {
        return Err(Error::Parameter(format!("b_n = {b_n} must lie in (0, 1/2)")));
    }
    if !(d_n > 0.0 && d_n < 0.5) {
        return Err(Error::Parameter(format!("d_n = {d_n} must lie in (0, 1/2)")));
    }
    if m_n < 2 {
        return Err(Error::Parameter(format!("window m_n = {m_n} must be >= 2")));
    }
    if b_reps < 10 {
        return Err(Error::Parameter(format!(
            "bootstrap replicate count B = {b_reps} must be >= 10"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    Ok(())
}

/// Constant-width simultaneous confidence surface.
#[allow(clippy::too_many_arguments)]
pub fn surface_constant(
    series: &FunctionalSeries,
    b_n: f64,
    d_n: f64,
    m_n: usize,
    alpha: f64,
    b_reps: usize,
    grid: &EvalGrid,
    seed: u64,
) -> Result<ConfidenceSurface> {
    common_checks(b_n, d_n, m_n, alpha, b_reps)?;
    let (_, residuals) = local_linear_fit(series, d_n)?;
    let kw = kernel_weights(series.n(), b_n)?;
    let accessor = BlockSumAccessor::new(
        &residuals.values,
        series.n(),
        series.p(),
        &kw,
        m_n,
    )?;
    let draws = bootstrap_draws(&accessor, b_reps, seed);
    let t_q = bootstrap_quantile(&draws, alpha)?;
    if t_q <= 0.0 {
        return Err(Error::DegenerateResiduals(
            "bootstrap quantile is zero; residuals carry no variation".into(),
        ));
    }
    let center = nw_estimate(series, b_n, grid)?;
    let radius = radius_scale(series.n(), b_n, accessor.half, accessor.m_prime) * t_q;
    let tuning = TuningRecord {
        b_n,
        d_n,
        m_n,
        m_prime: accessor.m_prime,
        w: 0,
        tau: 0.0,
        b_reps,
        seed,
        quantile_value: t_q,
    };
    ConfidenceSurface::from_center_radius(
        grid.clone(),
        center,
        Radius::Scalar(radius),
        alpha,
        WidthMode::Constant,
        tuning,
    )
}

/// Outcome of sigma-normalizing a residual matrix.
pub struct NormalizedResiduals {
    pub values: Vec<f64>,
    /// Positivity floor applied to sigma.
    pub floor: f64,
    /// Number of cells where sigma fell below the floor.
    pub floored_cells: usize,
}

/// Divide residuals by `max(sigma(i/n, t_k), floor)` with
/// `floor = 1e-6 * median(sigma)` over the design points.
pub fn normalize_residuals(
    residuals: &ResidualMatrix,
    sigma: &dyn Fn(f64, usize) -> f64,
) -> Result<NormalizedResiduals> {
    let n = residuals.n;
    let p = residuals.p;
    let mut sig = vec![0.0f64; n * p];
    for i in 0..n {
        let u = (i + 1) as f64 / n as f64;
        for k in 0..p {
            let s = sigma(u, k);
            if !s.is_finite() || s < 0.0 {
                return Err(Error::Numerical(format!(
                    "invalid sigma estimate {s} at (u = {u}, column {k})"
                )));
            }
            sig[i * p + k] = s;
        }
    }
    let mut sorted = sig.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    if median <= 0.0 {
        return Err(Error::DegenerateResiduals(
            "long-run variance estimate is zero everywhere".into(),
        ));
    }
    let floor = 1e-6 * median;
    let mut floored_cells = 0usize;
    let values = residuals
        .values
        .iter()
        .zip(sig.iter())
        .map(|(&e, &s)| {
            if s < floor {
                floored_cells += 1;
                e / floor
            } else {
                e / s
            }
        })
        .collect();
    Ok(NormalizedResiduals {
        values,
        floor,
        floored_cells,
    })
}

/// Varying-width surface with the long-run variance estimated from the data.
#[allow(clippy::too_many_arguments)]
pub fn surface_varying(
    series: &FunctionalSeries,
    b_n: f64,
    d_n: f64,
    m_n: usize,
    lrv_params: LrvParams,
    alpha: f64,
    b_reps: usize,
    grid: &EvalGrid,
    seed: u64,
) -> Result<ConfidenceSurface> {
    let field = LrvField::new(series, lrv_params)?;
    // Per-row sigma cache over design points.
    let n = series.n();
    let p = series.p();
    let sig = field.design_sigma()?;
    let sigma_design = move |u: f64, k: usize| -> f64 {
        let i = ((u * n as f64).round() as usize).clamp(1, n);
        sig[(i - 1) * p + k]
    };
    let sigma_grid = field.field(grid, series)?;
    let sigma_grid: Vec<f64> = sigma_grid.into_iter().map(f64::sqrt).collect();
    let mut surface = surface_varying_with_sigma(
        series,
        b_n,
        d_n,
        m_n,
        alpha,
        b_reps,
        grid,
        seed,
        &sigma_design,
        &sigma_grid,
    )?;
    surface.tuning.w = lrv_params.w;
    surface.tuning.tau = lrv_params.tau;
    Ok(surface)
}

/// Varying-width surface with an externally supplied sigma field.
///
/// `sigma_design(u, k)` normalizes the residual at design point `(u, t_k)`;
/// `sigma_grid` holds sigma on the evaluation grid, row-major `u x t`.
#[allow(clippy::too_many_arguments)]
pub fn surface_varying_with_sigma(
    series: &FunctionalSeries,
    b_n: f64,
    d_n: f64,
    m_n: usize,
    alpha: f64,
    b_reps: usize,
    grid: &EvalGrid,
    seed: u64,
    sigma_design: &dyn Fn(f64, usize) -> f64,
    sigma_grid: &[f64],
) -> Result<ConfidenceSurface> {
    common_checks(b_n, d_n, m_n, alpha, b_reps)?;
    if sigma_grid.len() != grid.len() {
        return Err(Error::Grid("sigma field does not match evaluation grid".into()));
    }
    let (_, residuals) = local_linear_fit(series, d_n)?;
    let normalized = normalize_residuals(&residuals, sigma_design)?;
    let kw = kernel_weights(series.n(), b_n)?;
    let accessor = BlockSumAccessor::new(
        &normalized.values,
        series.n(),
        series.p(),
        &kw,
        m_n,
    )?;
    let draws = bootstrap_draws(&accessor, b_reps, seed);
    let t_q = bootstrap_quantile(&draws, alpha)?;
    if t_q <= 0.0 {
        return Err(Error::DegenerateResiduals(
            "bootstrap quantile is zero; residuals carry no variation".into(),
        ));
    }
    let center = nw_estimate(series, b_n, grid)?;
    let scale = radius_scale(series.n(), b_n, accessor.half, accessor.m_prime) * t_q;
    let radius: Vec<f64> = sigma_grid.iter().map(|&s| s * scale).collect();
    let tuning = TuningRecord {
        b_n,
        d_n,
        m_n,
        m_prime: accessor.m_prime,
        w: 0,
        tau: 0.0,
        b_reps,
        seed,
        quantile_value: t_q,
    };
    ConfidenceSurface::from_center_radius(
        grid.clone(),
        center,
        Radius::Field(radius),
        alpha,
        WidthMode::Varying,
        tuning,
    )
}
