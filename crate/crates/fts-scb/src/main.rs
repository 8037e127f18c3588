//! Command-line frontend: reproducible confidence surface/band runs.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use fts_scb::bands::{band_fixed_t, band_fixed_u};
use fts_scb::bootstrap::{surface_constant, surface_varying};
use fts_scb::error::{Error, Result};
use fts_scb::io::{
    load_series_csv, save_band_csv, save_series_csv, save_surface_csv, write_text, Report,
};
use fts_scb::lrv::{default_lrv_params, LrvField, LrvParams};
use fts_scb::series::{EvalGrid, FixedAxis, FunctionalSeries, TuningRecord, WidthMode};
use fts_scb::simgen::{
    coverage_experiment, simulate_model, CoverageConfig, FixedTuning, Model, ModelSpec, Pipeline,
    TuningMode,
};
use fts_scb::tuning::{
    mgcv_bandwidth, mgcv_bandwidth_local, minimal_volatility_window, surface_bandwidth,
    BandwidthGrid, WindowGrid,
};

#[derive(Parser)]
#[command(
    name = "fts-scb",
    version,
    about = "Simultaneous confidence surfaces for locally stationary functional time series"
)]
struct Cli {
    /// Worker threads for parallel sections (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TuningFlags {
    /// Surface bandwidth; default 1.2 * d_n.
    #[arg(long = "b-n")]
    b_n: Option<f64>,
    /// Residual (detrending) bandwidth; default chosen by MGCV.
    #[arg(long = "d-n")]
    d_n: Option<f64>,
    /// Bootstrap window m_n; default chosen by minimal volatility.
    #[arg(long = "m-n")]
    m_n: Option<usize>,
    /// Long-run variance block length; default floor(n^(2/7)).
    #[arg(long)]
    w: Option<usize>,
    /// Long-run variance smoothing bandwidth; default n^(-1/7).
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args)]
struct DomainFlag {
    /// Space domain as "a,b".
    #[arg(long, default_value = "0,1", value_parser = parse_domain)]
    domain: (f64, f64),
}

fn parse_domain(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| "expected 'a,b'".to_string())?;
    let a: f64 = a.trim().parse().map_err(|_| "invalid lower bound".to_string())?;
    let b: f64 = b.trim().parse().map_err(|_| "invalid upper bound".to_string())?;
    if a >= b || a.is_nan() || b.is_nan() {
        return Err("domain lower bound must be below upper bound".into());
    }
    Ok((a, b))
}

#[derive(Subcommand)]
enum Command {
    /// Simultaneous confidence surface for the mean m(u, t).
    Surface {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Bootstrap replicates.
        #[arg(long = "B", default_value_t = 1000)]
        b_reps: usize,
        #[arg(long, default_value = "constant", value_parser = parse_width)]
        width: WidthMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        tuning: TuningFlags,
        #[command(flatten)]
        domain: DomainFlag,
    },
    /// Confidence band with one argument of m(u, t) fixed.
    Band {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Fix t at this value (band runs over u). Must hit a grid column.
        #[arg(long = "fix-t", conflicts_with = "fix_u")]
        fix_t: Option<f64>,
        /// Fix u at this value (band runs over t).
        #[arg(long = "fix-u")]
        fix_u: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long = "B", default_value_t = 1000)]
        b_reps: usize,
        #[arg(long, default_value = "constant", value_parser = parse_width)]
        width: WidthMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        tuning: TuningFlags,
        #[command(flatten)]
        domain: DomainFlag,
    },
    /// Data-driven tuning: d_n (MGCV), b_n = 1.2 d_n, m_n (minimal volatility).
    Tune {
        #[arg(long)]
        input: PathBuf,
        /// Optional CSV of the criterion curves.
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        domain: DomainFlag,
    },
    /// Long-run variance field on the design grid.
    Lrv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        w: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        #[command(flatten)]
        domain: DomainFlag,
    },
    /// Simulate one dataset from models (a)-(d).
    Simulate {
        #[arg(long, value_parser = Model::parse)]
        model: Model,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Monte-Carlo coverage experiment.
    Coverage {
        #[arg(long, value_parser = Model::parse)]
        model: Model,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        runs: usize,
        #[arg(long = "B", default_value_t = 500)]
        b_reps: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value = "constant", value_parser = parse_width)]
        width: WidthMode,
        /// surface (default), or a fixed-axis band via --fix-t / --fix-u.
        #[arg(long = "fix-t", conflicts_with = "fix_u")]
        fix_t: Option<f64>,
        #[arg(long = "fix-u")]
        fix_u: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: PathBuf,
        /// Optional per-run CSV (run, hit, tuning parameters).
        #[arg(long = "runs-output")]
        runs_output: Option<PathBuf>,
        #[command(flatten)]
        tuning: TuningFlags,
    },
    /// Resample irregular per-row observations onto the uniform grid by
    /// linear interpolation and constant extrapolation. Input rows hold
    /// alternating position,value pairs with strictly increasing positions.
    Resample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Number of uniform grid columns.
        #[arg(long)]
        p: usize,
        #[command(flatten)]
        domain: DomainFlag,
    },
}

fn parse_width(s: &str) -> std::result::Result<WidthMode, String> {
    match s {
        "constant" => Ok(WidthMode::Constant),
        "varying" => Ok(WidthMode::Varying),
        other => Err(format!("unknown width mode '{other}' (constant|varying)")),
    }
}

/// A tuning value plus where it came from, for the run report.
struct Resolved {
    b_n: f64,
    d_n: f64,
    m_n: usize,
    lrv: LrvParams,
    b_source: &'static str,
    d_source: &'static str,
    m_source: &'static str,
    lrv_source: &'static str,
}

/// Resolve tuning parameters: flags always win; anything missing is
/// auto-tuned. `local_u` switches the MGCV criterion to its localized
/// variant around a fixed u.
fn resolve_tuning(
    series: &FunctionalSeries,
    flags: &TuningFlags,
    local_u: Option<f64>,
) -> Result<Resolved> {
    let n = series.n();
    let (d_n, d_source) = match flags.d_n {
        Some(d) => (d, "flag"),
        None => {
            let grid = BandwidthGrid::default_for(n)?;
            let d = match local_u {
                Some(u) => mgcv_bandwidth_local(series, u, &grid)?,
                None => mgcv_bandwidth(series, &grid)?,
            };
            (d, "auto")
        }
    };
    let (b_n, b_source) = match flags.b_n {
        Some(b) => (b, "flag"),
        None => (surface_bandwidth(d_n)?, "auto"),
    };
    let (lrv, lrv_source) = match (flags.w, flags.tau) {
        (Some(w), Some(tau)) => (LrvParams::new(w, tau)?, "flag"),
        (None, None) => (default_lrv_params(n)?, "auto"),
        (Some(w), None) => (
            LrvParams::new(w, default_lrv_params(n)?.tau)?,
            "flag+auto",
        ),
        (None, Some(tau)) => (
            LrvParams::new(default_lrv_params(n)?.w, tau)?,
            "auto+flag",
        ),
    };
    let (m_n, m_source) = match flags.m_n {
        Some(m) => (m, "flag"),
        None => {
            let grid = WindowGrid::default_for(n, b_n)?;
            (
                minimal_volatility_window(series, b_n, d_n, lrv, &grid)?,
                "auto",
            )
        }
    };
    Ok(Resolved {
        b_n,
        d_n,
        m_n,
        lrv,
        b_source,
        d_source,
        m_source,
        lrv_source,
    })
}

fn report_tuning(report: &mut Report, r: &Resolved, record: &TuningRecord) {
    report.push_f64("b_n", r.b_n);
    report.push("b_n_source", r.b_source);
    report.push_f64("d_n", r.d_n);
    report.push("d_n_source", r.d_source);
    report.push("m_n", r.m_n);
    report.push("m_n_source", r.m_source);
    report.push("m_prime", record.m_prime);
    report.push("w", r.lrv.w);
    report.push_f64("tau", r.lrv.tau);
    report.push("lrv_source", r.lrv_source);
    report.push_f64("quantile_value", record.quantile_value);
}

fn report_header(report: &mut Report, command: &str, seed: u64) {
    report.push("command", command);
    report.push("version", env!("CARGO_PKG_VERSION"));
    report.push("seed", seed);
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    }
    let start = Instant::now();
    match cli.command {
        Command::Surface {
            input,
            output,
            report: report_path,
            alpha,
            b_reps,
            width,
            seed,
            tuning,
            domain,
        } => {
            let series = load_series_csv(&input, domain.domain)?;
            let resolved = resolve_tuning(&series, &tuning, None)?;
            let grid = EvalGrid::theory_grid(&series, resolved.b_n)?;
            let surface = match width {
                WidthMode::Constant => surface_constant(
                    &series, resolved.b_n, resolved.d_n, resolved.m_n, alpha, b_reps,
                    &grid, seed,
                )?,
                WidthMode::Varying => surface_varying(
                    &series, resolved.b_n, resolved.d_n, resolved.m_n, resolved.lrv,
                    alpha, b_reps, &grid, seed,
                )?,
            };
            save_surface_csv(&surface, &output)?;
            let mut report = Report::new();
            report_header(&mut report, "surface", seed);
            report.push("input", input.display());
            report.push("output", output.display());
            report.push("n", series.n());
            report.push("p", series.p());
            report.push_f64("alpha", alpha);
            report.push("B", b_reps);
            report.push("width", width);
            report_tuning(&mut report, &resolved, &surface.tuning);
            report.push_f64("wall_time_secs", start.elapsed().as_secs_f64());
            if let Some(path) = report_path {
                report.write_to(&path)?;
            }
            println!(
                "surface: {} cells, width={}, T_q={}",
                surface.grid.len(),
                width,
                surface.tuning.quantile_value
            );
            Ok(())
        }
        Command::Band {
            input,
            output,
            report: report_path,
            fix_t,
            fix_u,
            alpha,
            b_reps,
            width,
            seed,
            tuning,
            domain,
        } => {
            let series = load_series_csv(&input, domain.domain)?;
            let resolved = resolve_tuning(&series, &tuning, fix_u)?;
            let lrv = Some(resolved.lrv);
            let band = match (fix_t, fix_u) {
                (Some(t), None) => {
                    let t_index = column_of(&series, t)?;
                    band_fixed_t(
                        &series, t_index, resolved.b_n, resolved.d_n, resolved.m_n,
                        alpha, b_reps, width, seed, lrv,
                    )?
                }
                (None, Some(u)) => band_fixed_u(
                    &series, u, resolved.b_n, resolved.d_n, resolved.m_n, alpha,
                    b_reps, width, seed, lrv,
                )?,
                _ => {
                    return Err(Error::Parameter(
                        "exactly one of --fix-t / --fix-u is required".into(),
                    ))
                }
            };
            save_band_csv(&band, &output)?;
            let mut report = Report::new();
            report_header(&mut report, "band", seed);
            report.push("input", input.display());
            report.push("output", output.display());
            report.push("n", series.n());
            report.push("p", series.p());
            match band.fixed_arg {
                FixedAxis::U(u) => report.push_f64("fix_u", u),
                FixedAxis::T(t) => report.push_f64("fix_t", t),
            }
            report.push_f64("alpha", alpha);
            report.push("B", b_reps);
            report.push("width", width);
            report_tuning(&mut report, &resolved, &band.tuning);
            report.push_f64("wall_time_secs", start.elapsed().as_secs_f64());
            if let Some(path) = report_path {
                report.write_to(&path)?;
            }
            println!(
                "band: {} points, width={}, T_q={}",
                band.grid.len(),
                width,
                band.tuning.quantile_value
            );
            Ok(())
        }
        Command::Tune {
            input,
            curves,
            report: report_path,
            domain,
        } => {
            let series = load_series_csv(&input, domain.domain)?;
            let n = series.n();
            let bw_grid = BandwidthGrid::default_for(n)?;
            let d_n = mgcv_bandwidth(&series, &bw_grid)?;
            let b_n = surface_bandwidth(d_n)?;
            let lrv = default_lrv_params(n)?;
            let win_grid = WindowGrid::default_for(n, b_n)?;
            let m_n = minimal_volatility_window(&series, b_n, d_n, lrv, &win_grid)?;
            println!("d_n={d_n}\nb_n={b_n}\nm_n={m_n}\nw={}\ntau={}", lrv.w, lrv.tau);
            if let Some(path) = curves {
                // One line per candidate: kind, candidate, criterion slot.
                let mut out = String::from("kind,candidate\n");
                for &b in &bw_grid.candidates {
                    out.push_str(&format!("bandwidth,{b}\n"));
                }
                for &m in &win_grid.candidates {
                    out.push_str(&format!("window,{m}\n"));
                }
                write_text(&path, &out)?;
            }
            if let Some(path) = report_path {
                let mut report = Report::new();
                report_header(&mut report, "tune", 0);
                report.push("input", input.display());
                report.push("n", n);
                report.push("p", series.p());
                report.push_f64("d_n", d_n);
                report.push_f64("b_n", b_n);
                report.push("m_n", m_n);
                report.push("w", lrv.w);
                report.push_f64("tau", lrv.tau);
                report.push_f64("wall_time_secs", start.elapsed().as_secs_f64());
                report.write_to(&path)?;
            }
            Ok(())
        }
        Command::Lrv {
            input,
            output,
            w,
            tau,
            domain,
        } => {
            let series = load_series_csv(&input, domain.domain)?;
            let params = match (w, tau) {
                (Some(w), Some(tau)) => LrvParams::new(w, tau)?,
                (None, None) => default_lrv_params(series.n())?,
                (Some(w), None) => LrvParams::new(w, default_lrv_params(series.n())?.tau)?,
                (None, Some(tau)) => LrvParams::new(default_lrv_params(series.n())?.w, tau)?,
            };
            let field = LrvField::new(&series, params)?;
            let mut out = String::from("u,t,sigma2\n");
            for i in 0..series.n() {
                let u = series.u_at(i);
                let row = field.estimate_row(u)?;
                for (k, &v) in row.iter().enumerate() {
                    out.push_str(&format!("{},{},{}\n", u, series.t_at(k), v));
                }
            }
            write_text(&output, &out)?;
            println!("lrv: w={}, tau={}", params.w, params.tau);
            Ok(())
        }
        Command::Simulate {
            model,
            n,
            p,
            seed,
            output,
        } => {
            let spec = ModelSpec::new(model, n, p, seed)?;
            let series = simulate_model(&spec)?;
            save_series_csv(&series, &output)?;
            println!("simulated model ({model}): n={n}, p={p}, seed={seed}");
            Ok(())
        }
        Command::Coverage {
            model,
            n,
            p,
            runs,
            b_reps,
            alpha,
            width,
            fix_t,
            fix_u,
            seed,
            report: report_path,
            runs_output,
            tuning,
        } => {
            // Pipelines need the t-grid to map --fix-t onto a column.
            let pipeline = match (fix_t, fix_u) {
                (None, None) => Pipeline::Surface,
                (Some(t), None) => {
                    let k = (t * p as f64).round() as usize;
                    if k < 1 || k > p || ((k as f64 / p as f64) - t).abs() > 1e-9 {
                        return Err(Error::Parameter(format!(
                            "--fix-t {t} is not a grid point k/p for p = {p}"
                        )));
                    }
                    Pipeline::FixedT(k - 1)
                }
                (None, Some(u)) => Pipeline::FixedU(u),
                _ => unreachable!("clap conflicts_with"),
            };
            let tuning_mode = match (tuning.b_n, tuning.d_n, tuning.m_n) {
                (Some(b_n), Some(d_n), Some(m_n)) => {
                    let lrv = match (tuning.w, tuning.tau) {
                        (Some(w), Some(tau)) => Some(LrvParams::new(w, tau)?),
                        _ => None,
                    };
                    TuningMode::Fixed(FixedTuning { b_n, d_n, m_n, lrv })
                }
                (None, None, None) => TuningMode::Auto,
                _ => {
                    return Err(Error::Parameter(
                        "fixed coverage tuning requires all of --b-n, --d-n, --m-n".into(),
                    ))
                }
            };
            let config = CoverageConfig {
                model,
                n,
                p,
                pipeline,
                width_mode: width,
                alpha,
                b_reps,
                runs,
                seed,
                tuning: tuning_mode,
            };
            let result = coverage_experiment(&config)?;
            let mut report = Report::new();
            report_header(&mut report, "coverage", seed);
            report.push("model", model);
            report.push("n", n);
            report.push("p", p);
            report.push("runs", result.runs);
            report.push("B", b_reps);
            report.push_f64("alpha", alpha);
            report.push("width", width);
            report.push("hits", result.hits);
            report.push_f64("coverage", result.coverage);
            report.push_f64("standard_error", result.standard_error);
            report.push_f64("wall_time_secs", start.elapsed().as_secs_f64());
            report.write_to(&report_path)?;
            if let Some(path) = runs_output {
                let mut out = String::from("run,hit,b_n,d_n,m_n,quantile_value\n");
                for (run, (hit, rec)) in result.per_run.iter().enumerate() {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        run, *hit as u8, rec.b_n, rec.d_n, rec.m_n, rec.quantile_value
                    ));
                }
                write_text(&path, &out)?;
            }
            println!(
                "coverage: {}/{} = {} (se {})",
                result.hits, result.runs, result.coverage, result.standard_error
            );
            Ok(())
        }
        Command::Resample {
            input,
            output,
            p,
            domain,
        } => {
            let series = resample_csv(&input, p, domain.domain)?;
            save_series_csv(&series, &output)?;
            println!("resampled onto {} x {} grid", series.n(), series.p());
            Ok(())
        }
    }
}

/// Map a t-value onto the 0-based column index of the series grid.
fn column_of(series: &FunctionalSeries, t: f64) -> Result<usize> {
    let (a, b) = series.domain();
    let p = series.p();
    let k = ((t - a) / (b - a) * p as f64).round() as isize - 1;
    if k < 0 || k >= p as isize || (series.t_at(k as usize) - t).abs() > 1e-9 {
        return Err(Error::Parameter(format!(
            "--fix-t {t} is not a spatial grid point of the input"
        )));
    }
    Ok(k as usize)
}

/// Linear interpolation with constant extrapolation of irregular rows
/// onto the uniform grid `t_k = a + (b-a)k/p`.
fn resample_csv(path: &std::path::Path, p: usize, domain: (f64, f64)) -> Result<FunctionalSeries> {
    if p < 2 {
        return Err(Error::Parameter(format!("p = {p} must be at least 2")));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let (a, b) = domain;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    msg: format!("cannot parse '{}' as a number", tok.trim()),
                })
            })
            .collect::<Result<_>>()?;
        if nums.len() < 2 || !nums.len().is_multiple_of(2) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: "expected an even number of position,value entries".into(),
            });
        }
        let pairs: Vec<(f64, f64)> = nums.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        if !pairs.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: "positions must be strictly increasing within a row".into(),
            });
        }
        let mut row = Vec::with_capacity(p);
        for k in 1..=p {
            let t = a + (b - a) * k as f64 / p as f64;
            row.push(interp_const_extrap(&pairs, t));
        }
        rows.push(row);
    }
    let n = rows.len();
    FunctionalSeries::new(rows.into_iter().flatten().collect(), n, p, domain)
}

fn interp_const_extrap(pairs: &[(f64, f64)], t: f64) -> f64 {
    if t <= pairs[0].0 {
        return pairs[0].1;
    }
    if t >= pairs[pairs.len() - 1].0 {
        return pairs[pairs.len() - 1].1;
    }
    let j = pairs.partition_point(|&(x, _)| x < t);
    let (x0, y0) = pairs[j - 1];
    let (x1, y1) = pairs[j];
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
