//! Simultaneous confidence surfaces and bands for the time-varying mean of
//! a locally stationary functional time series.
//!
//! The estimator is an unnormalized Nadaraya-Watson smoother with an
//! order-4 kernel; the critical values come from a shared-multiplier block
//! bootstrap applied to local-linear residuals. The crate also provides
//! long-run variance estimation, data-driven bandwidth and window tuning,
//! simulation models and a Monte-Carlo coverage harness.

pub mod bands;
pub mod bootstrap;
pub mod error;
pub mod io;
pub mod kernels;
pub mod lrv;
pub mod rng;
pub mod series;
pub mod simgen;
pub mod smoothing;
pub mod tuning;

pub use error::{Error, Result};
