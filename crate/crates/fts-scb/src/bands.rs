//! One-dimensional simultaneous confidence bands: fixed spatial point
//! (band over rescaled time) and fixed rescaled time (band over space).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bootstrap::{bootstrap_quantile, surface_constant, surface_varying};
use crate::error::{Error, Result};
use crate::kernels::kernel_k;
use crate::lrv::{LrvField, LrvParams};
use crate::rng::{stream_rng, Stream};
use crate::series::{
    ConfidenceBand, ConfidenceSurface, EvalGrid, FixedAxis, FunctionalSeries, Radius, WidthMode,
};
use crate::smoothing::{local_linear_fit, nw_estimate};

/// Extract column `t_index` (0-based) as a `p = 1` series.
fn column_series(series: &FunctionalSeries, t_index: usize) -> Result<FunctionalSeries> {
    if t_index >= series.p() {
        return Err(Error::Parameter(format!(
            "spatial index {} out of range for p = {}",
            t_index + 1,
            series.p()
        )));
    }
    let vals: Vec<f64> = (0..series.n()).map(|i| series.value(i, t_index)).collect();
    // The single retained column keeps its own spatial coordinate; only the
    // band's `fixed_arg` records it, so the unit domain is fine here.
    FunctionalSeries::from_matrix(vals, series.n(), 1)
}

fn surface_to_band(surface: ConfidenceSurface, fixed_arg: FixedAxis) -> ConfidenceBand {
    ConfidenceBand {
        fixed_arg,
        grid: surface.grid.u_values,
        center: surface.center,
        lower: surface.lower,
        upper: surface.upper,
        level: surface.level,
        width_mode: surface.width_mode,
        radius: surface.radius,
        tuning: surface.tuning,
    }
}

/// Simultaneous confidence band for `u -> m(u, t_{k*})` with `t` fixed.
///
/// The band is the full-surface pipeline applied to the single residual
/// column: same block sums, same shared multipliers, same radius constant.
/// With the same seed it is bit-identical to `surface_constant` /
/// `surface_varying` run on the extracted `p = 1` series.
#[allow(clippy::too_many_arguments)]
pub fn band_fixed_t(
    series: &FunctionalSeries,
    t_index: usize,
    b_n: f64,
    d_n: f64,
    m_n: usize,
    alpha: f64,
    b_reps: usize,
    mode: WidthMode,
    seed: u64,
    lrv_params: Option<LrvParams>,
) -> Result<ConfidenceBand> {
    let column = column_series(series, t_index)?;
    let grid = EvalGrid::theory_grid(&column, b_n)?;
    let fixed = FixedAxis::T(series.t_at(t_index));
    let surface = match mode {
        WidthMode::Constant => {
            surface_constant(&column, b_n, d_n, m_n, alpha, b_reps, &grid, seed)?
        }
        WidthMode::Varying => {
            let params = match lrv_params {
                Some(p) => p,
                None => crate::lrv::default_lrv_params(column.n())?,
            };
            surface_varying(&column, b_n, d_n, m_n, params, alpha, b_reps, &grid, seed)?
        }
    };
    Ok(surface_to_band(surface, fixed))
}

/// Simultaneous confidence band for `t -> m(u*, t)` with `u` fixed.
///
/// Works on the local window `I(u*) = [ceil(n u* - n b_n), floor(n u* + n b_n)]`
/// (1-based rows) and the kernel-weighted residual vectors
/// `Z_i = K(((i/n) - u*)/b_n) eps_i`. Block sums run over window positions
/// `j = i_lo .. i_hi - m' + 1`:
/// `S_j = (1/sqrt(m')) (sum_{r=j}^{j+h-1} Z_r - sum_{r=j+h}^{j+m'-1} Z_r)`,
/// and each replicate draws one fresh multiplier per position `j` — no
/// shared shifting, since there is a single `u`. The radius denominator
/// `sqrt(i_hi - i_lo - m' + 2)` follows the source algorithm verbatim.
#[allow(clippy::too_many_arguments)]
pub fn band_fixed_u(
    series: &FunctionalSeries,
    u_star: f64,
    b_n: f64,
    d_n: f64,
    m_n: usize,
    alpha: f64,
    b_reps: usize,
    mode: WidthMode,
    seed: u64,
    lrv_params: Option<LrvParams>,
) -> Result<ConfidenceBand> {
    if !(b_n > 0.0 && b_n < 0.5) {
        return Err(Error::Parameter(format!("b_n = {b_n} must lie in (0, 1/2)")));
    }
    if u_star < b_n || u_star > 1.0 - b_n {
        return Err(Error::Parameter(format!(
            "u* = {u_star} outside the interior interval [{b_n}, {}]",
            1.0 - b_n
        )));
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
    let n = series.n();
    let p = series.p();
    let nf = n as f64;
    let nb = nf * b_n;
    // 1-based window bounds i_lo..i_hi, clamped to the design range.
    let i_lo = ((u_star * nf - nb).ceil().max(1.0)) as usize;
    let i_hi = (((u_star * nf + nb).floor()) as usize).min(n);
    let h = m_n / 2;
    let m_prime = 2 * h;
    if m_prime < 2 {
        return Err(Error::Parameter(format!("window m_n = {m_n} yields m' < 2")));
    }
    if i_hi < i_lo + m_prime + 1 {
        return Err(Error::Parameter(format!(
            "local window [{i_lo}, {i_hi}] shorter than m' + 2 = {}",
            m_prime + 2
        )));
    }

    let (_, residuals) = local_linear_fit(series, d_n)?;

    // Optional sigma normalization (fixed first argument u*).
    let mut params_used: Option<LrvParams> = None;
    let (sigma_t, norm): (Option<Vec<f64>>, Option<Vec<f64>>) = match mode {
        WidthMode::Constant => (None, None),
        WidthMode::Varying => {
            let params = match lrv_params {
                Some(q) => q,
                None => crate::lrv::default_lrv_params(n)?,
            };
            params_used = Some(params);
            let field = LrvField::new(series, params)?;
            let sig: Vec<f64> = field
                .estimate_row(u_star)?
                .into_iter()
                .map(f64::sqrt)
                .collect();
            let mut sorted = sig.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = sorted[sorted.len() / 2];
            if median <= 0.0 {
                return Err(Error::DegenerateResiduals(
                    "long-run variance estimate is zero at u*".into(),
                ));
            }
            let floor = 1e-6 * median;
            let norm: Vec<f64> = sig.iter().map(|&s| s.max(floor)).collect();
            (Some(sig), Some(norm))
        }
    };

    // Kernel-weighted residual vectors Z_i = K(((i/n)-u*)/b_n) eps_i for
    // i in the window, laid out row-major (window-relative).
    let win = i_hi - i_lo + 1;
    let mut z = vec![0.0f64; win * p];
    for (row, i) in (i_lo..=i_hi).enumerate() {
        let wk = kernel_k((i as f64 / nf - u_star) / b_n);
        let e = residuals.row(i - 1);
        let slot = &mut z[row * p..(row + 1) * p];
        for (s, out) in slot.iter_mut().enumerate() {
            let denom = norm.as_ref().map_or(1.0, |d| d[s]);
            *out = wk * e[s] / denom;
        }
    }

    // Block sums S_j, one per window position j = i_lo .. i_hi - m' + 1;
    // window-relative j0 = 0 .. win - m', giving nj = win - m' + 1 positions
    // (this count equals the radius denominator i_hi - i_lo - m' + 2).
    let nj = win - m_prime + 1;
    let inv_sqrt_m = 1.0 / (m_prime as f64).sqrt();
    let mut blocks = vec![0.0f64; nj * p];
    for j0 in 0..nj {
        let slot_range = j0 * p..(j0 + 1) * p;
        for r in j0..j0 + h {
            for s in 0..p {
                blocks[slot_range.start + s] += z[r * p + s];
            }
        }
        for r in j0 + h..j0 + m_prime {
            for s in 0..p {
                blocks[slot_range.start + s] -= z[r * p + s];
            }
        }
        for s in 0..p {
            blocks[slot_range.start + s] *= inv_sqrt_m;
        }
    }

    // Fresh independent multipliers, one per position j, per replicate.
    let draws: Vec<f64> = (0..b_reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, Stream::BootstrapReplicate, rep);
            let mut acc = vec![0.0f64; p];
            for j0 in 0..nj {
                let c: f64 = rng.sample(StandardNormal);
                let row = &blocks[j0 * p..(j0 + 1) * p];
                for (slot, &b) in acc.iter_mut().zip(row.iter()) {
                    *slot += c * b;
                }
            }
            acc.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
        })
        .collect();
    let t_q = bootstrap_quantile(&draws, alpha)?;
    if t_q <= 0.0 {
        return Err(Error::DegenerateResiduals(
            "bootstrap quantile is zero; residuals carry no variation".into(),
        ));
    }

    let denom = (i_hi - i_lo - m_prime + 2) as f64;
    let base_radius = 2.0f64.sqrt() * t_q / (nb.sqrt() * denom.sqrt());

    let grid = EvalGrid::new(vec![u_star], series.t_grid())?;
    let center = nw_estimate(series, b_n, &grid)?;
    let (radius, width_mode) = match &sigma_t {
        None => (Radius::Scalar(base_radius), WidthMode::Constant),
        Some(sig) => (
            Radius::Field(sig.iter().map(|&s| s * base_radius).collect()),
            WidthMode::Varying,
        ),
    };
    let tuning = crate::series::TuningRecord {
        b_n,
        d_n,
        m_n,
        m_prime,
        w: params_used.map_or(0, |q| q.w),
        tau: params_used.map_or(0.0, |q| q.tau),
        b_reps,
        seed,
        quantile_value: t_q,
    };
    ConfidenceBand::from_center_radius(
        FixedAxis::U(u_star),
        series.t_grid(),
        center,
        radius,
        alpha,
        width_mode,
        tuning,
    )
}

/// Block sums for the fixed-u band, exposed for oracle tests.
#[allow(clippy::too_many_arguments)]
pub fn fixed_u_block_sums(
    series: &FunctionalSeries,
    u_star: f64,
    b_n: f64,
    d_n: f64,
    m_n: usize,
) -> Result<(Vec<f64>, usize, usize)> {
    let n = series.n();
    let p = series.p();
    let nf = n as f64;
    let nb = nf * b_n;
    let i_lo = ((u_star * nf - nb).ceil().max(1.0)) as usize;
    let i_hi = (((u_star * nf + nb).floor()) as usize).min(n);
    let h = m_n / 2;
    let m_prime = 2 * h;
    let (_, residuals) = local_linear_fit(series, d_n)?;
    let win = i_hi - i_lo + 1;
    let nj = win - m_prime + 1;
    let inv_sqrt_m = 1.0 / (m_prime as f64).sqrt();
    let mut blocks = vec![0.0f64; nj * p];
    for j0 in 0..nj {
        for r in j0..j0 + m_prime {
            let i = i_lo + r;
            let wk = kernel_k((i as f64 / nf - u_star) / b_n);
            let sign = if r < j0 + h { 1.0 } else { -1.0 };
            let e = residuals.row(i - 1);
            for s in 0..p {
                blocks[j0 * p + s] += sign * wk * e[s];
            }
        }
        for s in 0..p {
            blocks[j0 * p + s] *= inv_sqrt_m;
        }
    }
    Ok((blocks, nj, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn noisy_series(n: usize, p: usize, seed: u64) -> FunctionalSeries {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..n * p)
            .map(|idx| {
                let u = (idx / p + 1) as f64 / n as f64;
                (1.0 + u) + 0.3 * (rng.gen::<f64>() - 0.5)
            })
            .collect();
        FunctionalSeries::from_matrix(vals, n, p).unwrap()
    }

    #[test]
    fn fixed_t_matches_surface_on_p1() {
        let s = noisy_series(120, 3, 1);
        let band = band_fixed_t(&s, 1, 0.2, 0.15, 4, 0.1, 80, WidthMode::Constant, 9, None)
            .unwrap();
        // Same pipeline on the extracted column.
        let col: Vec<f64> = (0..120).map(|i| s.value(i, 1)).collect();
        let cs = FunctionalSeries::from_matrix(col, 120, 1).unwrap();
        let grid = EvalGrid::theory_grid(&cs, 0.2).unwrap();
        let surf = surface_constant(&cs, 0.2, 0.15, 4, 0.1, 80, &grid, 9).unwrap();
        assert_eq!(band.grid, surf.grid.u_values);
        assert_eq!(band.center, surf.center);
        assert_eq!(band.lower, surf.lower);
        assert_eq!(band.upper, surf.upper);
    }

    #[test]
    fn fixed_t_varying_runs_and_brackets_center() {
        let s = noisy_series(150, 2, 2);
        let band =
            band_fixed_t(&s, 0, 0.2, 0.15, 4, 0.1, 80, WidthMode::Varying, 11, None).unwrap();
        for i in 0..band.grid.len() {
            assert!(band.lower[i] < band.center[i] && band.center[i] < band.upper[i]);
        }
        assert_eq!(band.width_mode, WidthMode::Varying);
    }

    #[test]
    fn fixed_u_band_shape_and_reproducibility() {
        let s = noisy_series(200, 4, 3);
        let b1 = band_fixed_u(&s, 0.5, 0.15, 0.12, 6, 0.1, 100, WidthMode::Constant, 5, None)
            .unwrap();
        let b2 = band_fixed_u(&s, 0.5, 0.15, 0.12, 6, 0.1, 100, WidthMode::Constant, 5, None)
            .unwrap();
        assert_eq!(b1, b2);
        assert_eq!(b1.grid.len(), 4);
        for i in 0..4 {
            assert!(b1.lower[i] < b1.center[i] && b1.center[i] < b1.upper[i]);
        }
        match b1.fixed_arg {
            FixedAxis::U(u) => assert_eq!(u, 0.5),
            _ => panic!("expected fixed u"),
        }
    }

    #[test]
    fn fixed_u_varying_scales_radius_by_sigma() {
        let s = noisy_series(240, 3, 4);
        let band =
            band_fixed_u(&s, 0.5, 0.15, 0.12, 6, 0.1, 100, WidthMode::Varying, 5, None).unwrap();
        if let Radius::Field(r) = &band.radius {
            assert_eq!(r.len(), 3);
            assert!(r.iter().all(|&v| v > 0.0));
        } else {
            panic!("varying band must carry a radius field");
        }
    }

    #[test]
    fn fixed_u_rejects_exterior_and_short_window() {
        let s = noisy_series(100, 2, 5);
        assert!(band_fixed_u(&s, 0.05, 0.2, 0.15, 4, 0.1, 50, WidthMode::Constant, 1, None)
            .is_err());
        // Window of about 2*n*b = 8 rows cannot host m' + 2 = 42.
        assert!(band_fixed_u(&s, 0.5, 0.04, 0.15, 40, 0.1, 50, WidthMode::Constant, 1, None)
            .is_err());
    }

    #[test]
    fn fixed_u_zero_residuals_degenerate() {
        // Identically zero data: residuals are exactly zero, so every
        // bootstrap draw is zero and the quantile degenerates.
        let n = 100;
        let s = FunctionalSeries::from_matrix(vec![0.0; n], n, 1).unwrap();
        let err = band_fixed_u(&s, 0.5, 0.2, 0.15, 4, 0.1, 50, WidthMode::Constant, 1, None)
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateResiduals(_)));
    }

    #[test]
    fn fixed_u_blocks_match_brute_force() {
        let s = noisy_series(80, 2, 6);
        let (u_star, b_n, d_n, m_n) = (0.5, 0.2, 0.15, 4);
        let (blocks, nj, p) = fixed_u_block_sums(&s, u_star, b_n, d_n, m_n).unwrap();
        // Independent reconstruction straight from the definition.
        let n = s.n();
        let nf = n as f64;
        let nb = nf * b_n;
        let i_lo = (u_star * nf - nb).ceil() as usize;
        let i_hi = (u_star * nf + nb).floor() as usize;
        let h = m_n / 2;
        let m_prime = 2 * h;
        assert_eq!(nj, i_hi - i_lo - m_prime + 2);
        let (_, res) = local_linear_fit(&s, d_n).unwrap();
        for (j0, j) in (i_lo..=i_hi - m_prime + 1).enumerate() {
            for s_idx in 0..p {
                let mut acc = 0.0;
                for r in j..j + h {
                    acc += kernel_k((r as f64 / nf - u_star) / b_n) * res.row(r - 1)[s_idx];
                }
                for r in j + h..j + m_prime {
                    acc -= kernel_k((r as f64 / nf - u_star) / b_n) * res.row(r - 1)[s_idx];
                }
                acc /= (m_prime as f64).sqrt();
                assert!((blocks[j0 * p + s_idx] - acc).abs() < 1e-12);
            }
        }
    }
}
