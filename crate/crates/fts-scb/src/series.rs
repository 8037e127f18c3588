//! Data model: functional time series on a uniform space grid, evaluation
//! grids and confidence outputs.

use crate::error::{Error, Result};

/// A functional time series observed on a uniform grid.
///
/// Row `i` (0-based) holds the curve observed at rescaled time
/// `u_i = (i+1)/n`; column `k` (0-based) corresponds to the spatial point
/// `t_k = a + (b-a)(k+1)/p` on the space domain `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSeries {
    n: usize,
    p: usize,
    values: Vec<f64>, // row-major n x p
    domain: (f64, f64),
}

impl FunctionalSeries {
    pub fn new(values: Vec<f64>, n: usize, p: usize, domain: (f64, f64)) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::Data("series must be non-empty".into()));
        }
        if values.len() != n * p {
            return Err(Error::Data(format!(
                "expected {} values for a {}x{} series, got {}",
                n * p,
                n,
                p,
                values.len()
            )));
        }
        if domain.1 <= domain.0 || !domain.0.is_finite() || !domain.1.is_finite() {
            return Err(Error::Grid(format!(
                "invalid space domain [{}, {}]",
                domain.0, domain.1
            )));
        }
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite value {} at row {}, column {}",
                    v,
                    idx / p + 1,
                    idx % p + 1
                )));
            }
        }
        Ok(Self { n, p, values, domain })
    }

    /// Series on the default space domain `[0, 1]`.
    pub fn from_matrix(values: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        Self::new(values, n, p, (0.0, 1.0))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.p + k]
    }

    /// Rescaled time of row `i` (0-based): `(i+1)/n`.
    pub fn u_at(&self, i: usize) -> f64 {
        (i + 1) as f64 / self.n as f64
    }

    /// Spatial grid point of column `k` (0-based).
    pub fn t_at(&self, k: usize) -> f64 {
        let (a, b) = self.domain;
        a + (b - a) * (k + 1) as f64 / self.p as f64
    }

    /// The full spatial grid `t_1, ..., t_p`.
    pub fn t_grid(&self) -> Vec<f64> {
        (0..self.p).map(|k| self.t_at(k)).collect()
    }
}

/// Interior interval `[b_n, 1 - b_n]` on which surfaces are evaluated.
pub fn interior_interval(b_n: f64) -> Result<(f64, f64)> {
    if !(b_n > 0.0 && b_n < 0.5) {
        return Err(Error::Parameter(format!(
            "bandwidth b_n = {b_n} must lie in (0, 1/2)"
        )));
    }
    Ok((b_n, 1.0 - b_n))
}

/// Evaluation grid for surfaces: sorted rescaled times and spatial points.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    pub u_values: Vec<f64>,
    pub t_values: Vec<f64>,
}

impl EvalGrid {
    pub fn new(u_values: Vec<f64>, t_values: Vec<f64>) -> Result<Self> {
        if u_values.is_empty() || t_values.is_empty() {
            return Err(Error::Grid("evaluation grid must be non-empty".into()));
        }
        if !is_sorted_strict(&u_values) || !is_sorted_strict(&t_values) {
            return Err(Error::Grid(
                "evaluation grid points must be strictly increasing".into(),
            ));
        }
        Ok(Self { u_values, t_values })
    }

    /// The default grid `{l/n} x {t_k}` restricted to `u` in `[b_n, 1-b_n]`.
    pub fn theory_grid(series: &FunctionalSeries, b_n: f64) -> Result<Self> {
        let (lo, hi) = interior_interval(b_n)?;
        let n = series.n();
        let u_values: Vec<f64> = (1..=n)
            .map(|l| l as f64 / n as f64)
            .filter(|&u| u >= lo && u <= hi)
            .collect();
        if u_values.is_empty() {
            return Err(Error::Grid(format!(
                "no design points l/n fall inside [{lo}, {hi}]"
            )));
        }
        Self::new(u_values, series.t_grid())
    }

    /// Verify every `u` lies inside `[b_n, 1-b_n]`.
    pub fn check_interior(&self, b_n: f64) -> Result<()> {
        let (lo, hi) = interior_interval(b_n)?;
        for &u in &self.u_values {
            if u < lo || u > hi {
                return Err(Error::Grid(format!(
                    "evaluation point u = {u} outside interior interval [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.u_values.len() * self.t_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_values.is_empty() || self.t_values.is_empty()
    }
}

fn is_sorted_strict(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

/// Whether a confidence region has constant or variance-adjusted width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthMode {
    Constant,
    Varying,
}

impl std::fmt::Display for WidthMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WidthMode::Constant => write!(f, "constant"),
            WidthMode::Varying => write!(f, "varying"),
        }
    }
}

/// Half-width of a confidence region: a scalar or a per-cell field.
#[derive(Debug, Clone, PartialEq)]
pub enum Radius {
    Scalar(f64),
    Field(Vec<f64>),
}

/// Tuning parameters that produced a confidence object.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningRecord {
    pub b_n: f64,
    pub d_n: f64,
    pub m_n: usize,
    pub m_prime: usize,
    pub w: usize,
    pub tau: f64,
    pub b_reps: usize,
    pub seed: u64,
    pub quantile_value: f64,
}

/// A simultaneous confidence surface over a 2-D evaluation grid.
///
/// Matrices are row-major with `u` as the slow index and `t` as the fast
/// one, so cell `(iu, it)` sits at `iu * t_values.len() + it`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSurface {
    pub grid: EvalGrid,
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    pub width_mode: WidthMode,
    pub radius: Radius,
    pub tuning: TuningRecord,
}

impl ConfidenceSurface {
    /// Assemble a surface from a center matrix and a radius, enforcing the
    /// envelope ordering.
    pub fn from_center_radius(
        grid: EvalGrid,
        center: Vec<f64>,
        radius: Radius,
        level: f64,
        width_mode: WidthMode,
        tuning: TuningRecord,
    ) -> Result<Self> {
        let cells = grid.len();
        if center.len() != cells {
            return Err(Error::Grid("center matrix does not match grid".into()));
        }
        let radius_at = |idx: usize| -> f64 {
            match &radius {
                Radius::Scalar(r) => *r,
                Radius::Field(f) => f[idx],
            }
        };
        if let Radius::Field(f) = &radius {
            if f.len() != cells {
                return Err(Error::Grid("radius field does not match grid".into()));
            }
        }
        let mut lower = Vec::with_capacity(cells);
        let mut upper = Vec::with_capacity(cells);
        for (idx, &c) in center.iter().enumerate() {
            let r = radius_at(idx);
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::DegenerateResiduals(format!(
                    "non-positive confidence radius {r} at cell {idx}"
                )));
            }
            lower.push(c - r);
            upper.push(c + r);
        }
        Ok(Self {
            grid,
            center,
            lower,
            upper,
            level,
            width_mode,
            radius,
            tuning,
        })
    }

    /// True when `f(u,t)` lies inside the envelope at every grid cell.
    pub fn contains(&self, f: impl Fn(f64, f64) -> f64) -> bool {
        let pt = self.grid.t_values.len();
        for (iu, &u) in self.grid.u_values.iter().enumerate() {
            for (it, &t) in self.grid.t_values.iter().enumerate() {
                let v = f(u, t);
                let idx = iu * pt + it;
                if v < self.lower[idx] || v > self.upper[idx] {
                    return false;
                }
            }
        }
        true
    }
}

/// Which argument of `m(u,t)` a one-dimensional band holds fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedAxis {
    /// `u` fixed; the band runs over `t`.
    U(f64),
    /// `t` fixed; the band runs over `u`.
    T(f64),
}

/// A simultaneous confidence band with one argument fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub fixed_arg: FixedAxis,
    pub grid: Vec<f64>,
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    pub width_mode: WidthMode,
    pub radius: Radius,
    pub tuning: TuningRecord,
}

impl ConfidenceBand {
    pub fn from_center_radius(
        fixed_arg: FixedAxis,
        grid: Vec<f64>,
        center: Vec<f64>,
        radius: Radius,
        level: f64,
        width_mode: WidthMode,
        tuning: TuningRecord,
    ) -> Result<Self> {
        if center.len() != grid.len() {
            return Err(Error::Grid("band center does not match grid".into()));
        }
        if let Radius::Field(f) = &radius {
            if f.len() != grid.len() {
                return Err(Error::Grid("band radius does not match grid".into()));
            }
        }
        let mut lower = Vec::with_capacity(center.len());
        let mut upper = Vec::with_capacity(center.len());
        for (idx, &c) in center.iter().enumerate() {
            let r = match &radius {
                Radius::Scalar(r) => *r,
                Radius::Field(f) => f[idx],
            };
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::DegenerateResiduals(format!(
                    "non-positive confidence radius {r} at position {idx}"
                )));
            }
            lower.push(c - r);
            upper.push(c + r);
        }
        Ok(Self {
            fixed_arg,
            grid,
            center,
            lower,
            upper,
            level,
            width_mode,
            radius,
            tuning,
        })
    }

    /// True when the curve lies inside the envelope at every grid point.
    pub fn contains(&self, f: impl Fn(f64) -> f64) -> bool {
        self.grid.iter().enumerate().all(|(idx, &x)| {
            let v = f(x);
            v >= self.lower[idx] && v <= self.upper[idx]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_interval_values() {
        assert_eq!(interior_interval(0.12).unwrap(), (0.12, 0.88));
        assert!(interior_interval(0.6).is_err());
        assert!(interior_interval(0.5).is_err());
        assert!(interior_interval(0.0).is_err());
    }

    #[test]
    fn grid_definition() {
        let s = FunctionalSeries::from_matrix(vec![0.0; 6], 3, 2).unwrap();
        assert_eq!(s.t_at(0), 0.5);
        assert_eq!(s.t_at(1), 1.0);
        assert_eq!(s.u_at(2), 1.0);
    }

    #[test]
    fn rejects_non_finite() {
        let err = FunctionalSeries::from_matrix(vec![0.0, f64::NAN, 1.0, 2.0], 2, 2)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 1"), "{msg}");
        assert!(msg.contains("column 2"), "{msg}");
    }

    #[test]
    fn theory_grid_is_interior() {
        let s = FunctionalSeries::from_matrix(vec![0.0; 500 * 2], 500, 2).unwrap();
        let g = EvalGrid::theory_grid(&s, 0.12).unwrap();
        assert!(g.u_values.iter().all(|&u| (0.12..=0.88).contains(&u)));
        g.check_interior(0.12).unwrap();
    }

    #[test]
    fn envelope_ordering() {
        let grid = EvalGrid::new(vec![0.5], vec![0.5, 1.0]).unwrap();
        let tuning = TuningRecord {
            b_n: 0.1,
            d_n: 0.1,
            m_n: 4,
            m_prime: 4,
            w: 4,
            tau: 0.4,
            b_reps: 100,
            seed: 0,
            quantile_value: 1.0,
        };
        let surf = ConfidenceSurface::from_center_radius(
            grid,
            vec![1.0, 2.0],
            Radius::Scalar(0.5),
            0.05,
            WidthMode::Constant,
            tuning,
        )
        .unwrap();
        for idx in 0..2 {
            assert!(surf.lower[idx] <= surf.center[idx]);
            assert!(surf.center[idx] <= surf.upper[idx]);
        }
        // A function inside both cells' envelopes is contained; one
        // outside the second cell's envelope is not.
        assert!(surf.contains(|_, t| if t < 0.75 { 1.2 } else { 2.2 }));
        assert!(!surf.contains(|_, _| 1.4));
    }
}
