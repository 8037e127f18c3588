//! CSV ingestion and serialization plus the flat key-value run report.
//!
//! All numbers are written as Rust's shortest round-trip decimal (the
//! default `Display` for `f64`), so a save/load cycle reproduces every
//! `f64` bit-exactly on any platform.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::series::{ConfidenceBand, ConfidenceSurface, EvalGrid, FixedAxis, FunctionalSeries};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_row(path: &Path, line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split(',')
        .enumerate()
        .map(|(col, tok)| {
            tok.trim().parse::<f64>().map_err(|_| {
                parse_err(
                    path,
                    line_no,
                    format!("column {}: cannot parse '{}' as a number", col + 1, tok.trim()),
                )
            })
        })
        .collect()
}

/// Whether a parsed first row is the header of t-values for a `p`-column
/// series on `domain`. Returns an error when the row clearly intends to be
/// a grid (strictly increasing, ends at the domain bound) but does not
/// match the uniform grid within 1e-9.
fn classify_header(row: &[f64], domain: (f64, f64), path: &Path) -> Result<bool> {
    let p = row.len();
    let (a, b) = domain;
    let grid_at = |k: usize| a + (b - a) * (k + 1) as f64 / p as f64;
    let matches = (0..p).all(|k| (row[k] - grid_at(k)).abs() <= 1e-9);
    if matches {
        return Ok(true);
    }
    let increasing = row.windows(2).all(|w| w[0] < w[1]);
    let ends_at_bound = (row[p - 1] - b).abs() <= 1e-9;
    let in_domain = row.iter().all(|&t| t >= a - 1e-9 && t <= b + 1e-9);
    if increasing && ends_at_bound && in_domain {
        return Err(Error::Grid(format!(
            "header row of {} looks like a t-grid but does not match the uniform grid t_k = a + (b-a)k/p within 1e-9",
            path.display()
        )));
    }
    Ok(false)
}

/// Load a functional series from CSV: an optional single header row of
/// t-values followed by a rectangular numeric body.
pub fn load_series_csv(path: &Path, domain: (f64, f64)) -> Result<FunctionalSeries> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut p: Option<usize> = None;
    let mut first_data_line = 1;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(path, line_no, line)?;
        if let Some(expect) = p {
            if row.len() != expect {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("expected {expect} columns, found {}", row.len()),
                ));
            }
        } else {
            p = Some(row.len());
            if classify_header(&row, domain, path)? {
                // Header consumed; the body starts on the next line.
                p = None;
                first_data_line = line_no + 1;
                continue;
            }
        }
        rows.push(row);
    }
    let p = p.ok_or_else(|| parse_err(path, first_data_line, "no data rows"))?;
    let n = rows.len();
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    FunctionalSeries::new(values, n, p, domain)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Save a functional series as CSV with a header row of t-values.
pub fn save_series_csv(series: &FunctionalSeries, path: &Path) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = series.t_grid().iter().map(|&t| fmt(t)).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..series.n() {
        let row: Vec<String> = series.row(i).iter().map(|&v| fmt(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Save a surface in long format: header `u,t,center,lower,upper`, one
/// row per grid cell in row-major (u-slow) order.
pub fn save_surface_csv(surface: &ConfidenceSurface, path: &Path) -> Result<()> {
    let mut out = String::from("u,t,center,lower,upper\n");
    let pt = surface.grid.t_values.len();
    for (iu, &u) in surface.grid.u_values.iter().enumerate() {
        for (it, &t) in surface.grid.t_values.iter().enumerate() {
            let idx = iu * pt + it;
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt(u),
                fmt(t),
                fmt(surface.center[idx]),
                fmt(surface.lower[idx]),
                fmt(surface.upper[idx])
            ));
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Surface data as read back from a long-format CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceData {
    pub grid: EvalGrid,
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Load a long-format surface CSV written by [`save_surface_csv`].
pub fn load_surface_csv(path: &Path) -> Result<SurfaceData> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "u,t,center,lower,upper" => {}
        _ => return Err(parse_err(path, 1, "missing 'u,t,center,lower,upper' header")),
    }
    let mut u_values: Vec<f64> = Vec::new();
    let mut t_values: Vec<f64> = Vec::new();
    let mut center = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row(path, idx + 1, line)?;
        if row.len() != 5 {
            return Err(parse_err(path, idx + 1, "expected 5 columns"));
        }
        if u_values.last() != Some(&row[0]) {
            u_values.push(row[0]);
        }
        if u_values.len() == 1 {
            t_values.push(row[1]);
        }
        center.push(row[2]);
        lower.push(row[3]);
        upper.push(row[4]);
    }
    let grid = EvalGrid::new(u_values, t_values)?;
    if center.len() != grid.len() {
        return Err(Error::Grid(format!(
            "surface CSV {} is not a complete row-major grid",
            path.display()
        )));
    }
    Ok(SurfaceData {
        grid,
        center,
        lower,
        upper,
    })
}

/// Save a band in long format. The running axis is named after the free
/// argument (`u` or `t`); the fixed value is recorded in the run report.
pub fn save_band_csv(band: &ConfidenceBand, path: &Path) -> Result<()> {
    let axis = match band.fixed_arg {
        FixedAxis::U(_) => "t",
        FixedAxis::T(_) => "u",
    };
    let mut out = format!("{axis},center,lower,upper\n");
    for (idx, &x) in band.grid.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt(x),
            fmt(band.center[idx]),
            fmt(band.lower[idx]),
            fmt(band.upper[idx])
        ));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Flat key-value run report with stable line order.
#[derive(Debug, Clone, Default)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.entries.push((key.to_string(), fmt(value)));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                parse_err(path, idx + 1, "expected 'key=value'")
            })?;
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Self { entries })
    }
}

/// Write bytes with I/O errors mapped onto the crate error type.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

/// Resolve a user-supplied path string.
pub fn to_path(s: &str) -> PathBuf {
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{Radius, TuningRecord, WidthMode};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("fts-scb-io-tests");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn load_plain_body() {
        let p = tmp("zeros.csv");
        fs::write(&p, "0,0\n0,0\n0,0\n").unwrap();
        let s = load_series_csv(&p, (0.0, 1.0)).unwrap();
        assert_eq!((s.n(), s.p()), (3, 2));
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn header_detection() {
        // Matching header consumed: t_k = k/p for p = 2.
        let p = tmp("header.csv");
        fs::write(&p, "0.5,1.0\n1,2\n3,4\n").unwrap();
        let s = load_series_csv(&p, (0.0, 1.0)).unwrap();
        assert_eq!((s.n(), s.p()), (2, 2));
        assert_eq!(s.value(0, 0), 1.0);

        // Grid-like but mismatched header is a grid error.
        let p2 = tmp("badheader.csv");
        fs::write(&p2, "0.4,1.0\n1,2\n").unwrap();
        let err = load_series_csv(&p2, (0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Grid(_)), "{err}");

        // Ordinary first data row is kept.
        let p3 = tmp("noheader.csv");
        fs::write(&p3, "5,3\n1,2\n").unwrap();
        let s3 = load_series_csv(&p3, (0.0, 1.0)).unwrap();
        assert_eq!(s3.n(), 2);
        assert_eq!(s3.value(0, 0), 5.0);
    }

    #[test]
    fn ragged_and_nan_errors() {
        let p = tmp("ragged.csv");
        fs::write(&p, "1,2\n3\n").unwrap();
        let err = load_series_csv(&p, (0.0, 1.0)).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }

        let p2 = tmp("nan.csv");
        fs::write(&p2, "1,2\n3,NaN\n").unwrap();
        let err = load_series_csv(&p2, (0.0, 1.0)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("column 2"), "{msg}");
    }

    #[test]
    fn series_round_trip_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let (n, p) = (17, 5);
        let vals: Vec<f64> = (0..n * p)
            .map(|_| f64::from_bits(rng.gen::<u64>() & 0x7FEF_FFFF_FFFF_FFFF))
            .map(|v| if v.is_finite() { v } else { 0.0 })
            .collect();
        let s = FunctionalSeries::from_matrix(vals, n, p).unwrap();
        let path = tmp("roundtrip.csv");
        save_series_csv(&s, &path).unwrap();
        let s2 = load_series_csv(&path, (0.0, 1.0)).unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn surface_round_trip_exact() {
        let grid = EvalGrid::new(vec![0.25, 0.5, 0.75], vec![0.5, 1.0]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let center: Vec<f64> = (0..6).map(|_| rng.gen::<f64>() * 10.0 - 5.0).collect();
        let tuning = TuningRecord {
            b_n: 0.2,
            d_n: 0.15,
            m_n: 4,
            m_prime: 4,
            w: 5,
            tau: 0.4,
            b_reps: 100,
            seed: 0,
            quantile_value: 1.0,
        };
        let surf = ConfidenceSurface::from_center_radius(
            grid,
            center,
            Radius::Scalar(0.37),
            0.05,
            WidthMode::Constant,
            tuning,
        )
        .unwrap();
        let path = tmp("surface.csv");
        save_surface_csv(&surf, &path).unwrap();
        let data = load_surface_csv(&path).unwrap();
        assert_eq!(data.grid, surf.grid);
        assert_eq!(data.center, surf.center);
        assert_eq!(data.lower, surf.lower);
        assert_eq!(data.upper, surf.upper);
        // Constant width: upper - center agrees with the scalar radius up
        // to the rounding already present in the in-memory surface.
        for idx in 0..6 {
            assert_eq!(
                data.upper[idx] - data.center[idx],
                surf.upper[idx] - surf.center[idx]
            );
            assert!((data.upper[idx] - data.center[idx] - 0.37).abs() < 1e-12);
        }
    }

    #[test]
    fn report_round_trip_and_order() {
        let mut r = Report::new();
        r.push("command", "surface");
        r.push_f64("alpha", 0.05);
        r.push("seed", 42u64);
        let path = tmp("report.txt");
        r.write_to(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "command=surface\nalpha=0.05\nseed=42\n");
        let back = Report::load(&path).unwrap();
        assert_eq!(back.get("alpha"), Some("0.05"));
        assert_eq!(back.get("command"), Some("surface"));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_series_csv(Path::new("/nonexistent/x.csv"), (0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert_eq!(err.exit_code(), 3);
    }
}
