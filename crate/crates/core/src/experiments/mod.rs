//! Seeded Monte Carlo checks of the estimator's asymptotic behaviour:
//! consistency rate, normal limit, quadratic strong law, iterated-logarithm
//! envelope, local expansion remainder, and size and power of the LR test.
//!
//! Each run produces an [`ExperimentReport`]: per-size aggregates and
//! pass/fail checks (written as `report.json`), one raw row per replicate
//! per size (`raw.csv`) and plot-ready series (`curves.csv`). Aggregates are
//! a pure function of the config and the raw rows, see [`aggregate`].
//!
//! The limit covariance of `sqrt(n) (theta_hat - theta)` used throughout is
//! the inverse of [`stationary_information`](crate::ar::stationary_information).

mod aggregate;
mod config;
mod raw;
mod report;
mod runner;

pub use aggregate::{aggregate, median, ols_slope, Aggregates, Check, KsSummary, SizeAggregate};
pub use config::{ExperimentConfig, ExperimentKind, RunOptions, TaskOrder, LIL_MIN_SIZE};
pub use raw::{read_raw_csv, write_raw_csv, RawRow};
pub use report::{aggregate_curves, CurvePoint, ExperimentReport};
pub use runner::run;

use crate::error::{Error, Result};

/// Tolerance bands for the checks.
pub mod thresholds {
    /// Allowed log-log slope of median error against `n`.
    pub const SLOPE_RANGE: (f64, f64) = (-0.65, -0.35);
    /// Relative deviation of the empirical variance from its limit.
    pub const VARIANCE_TOL: f64 = 0.15;
    /// Minimum Kolmogorov-Smirnov p-value.
    pub const KS_LEVEL: f64 = 0.01;
    /// Allowed deviation of the rejection rate from `alpha` under the null.
    pub const SIZE_TOL: f64 = 0.015;
    /// Allowed deviation of the rejection rate from the limit power.
    pub const POWER_TOL: f64 = 0.05;
    pub const QSL_RANGE: (f64, f64) = (0.5, 2.0);
    /// Multiple of the envelope that the running sup may reach.
    pub const LIL_ENVELOPE_FACTOR: f64 = 2.0;
    /// Share of paths that must stay inside the widened envelope (strictly more).
    pub const LIL_MAJORITY: f64 = 0.5;
    /// Bound on the median absolute remainder at the largest size.
    pub const LAN_MEDIAN_MAX: f64 = 0.05;
    /// Largest tolerated share of singular replicates.
    pub const MAX_FAILURE_FRACTION: f64 = 0.01;
}

fn run_kind(
    cfg: &ExperimentConfig,
    options: RunOptions,
    accepts: fn(&ExperimentKind) -> bool,
    expected: &str,
) -> Result<ExperimentReport> {
    if !accepts(&cfg.experiment) {
        return Err(Error::InvalidConfig(format!(
            "expected a {expected} experiment, got {}",
            cfg.experiment.name()
        )));
    }
    run(cfg, options)
}

pub fn run_consistency(cfg: &ExperimentConfig, options: RunOptions) -> Result<ExperimentReport> {
    run_kind(cfg, options, |k| matches!(k, ExperimentKind::Consistency), "consistency")
}

pub fn run_clt(cfg: &ExperimentConfig, options: RunOptions) -> Result<ExperimentReport> {
    run_kind(cfg, options, |k| matches!(k, ExperimentKind::Clt), "clt")
}

pub fn run_qsl(cfg: &ExperimentConfig, options: RunOptions) -> Result<ExperimentReport> {
    run_kind(cfg, options, |k| matches!(k, ExperimentKind::Qsl), "qsl")
}

pub fn run_lil(cfg: &ExperimentConfig, options: RunOptions) -> Result<ExperimentReport> {
    run_kind(cfg, options, |k| matches!(k, ExperimentKind::Lil { .. }), "lil")
}

pub fn run_lan_remainder(cfg: &ExperimentConfig, options: RunOptions) -> Result<ExperimentReport> {
    run_kind(
        cfg,
        options,
        |k| matches!(k, ExperimentKind::LanRemainder { .. }),
        "lan_remainder",
    )
}

/// Size or power, depending on whether the config carries a local shift.
pub fn run_test(cfg: &ExperimentConfig, options: RunOptions) -> Result<ExperimentReport> {
    run_kind(
        cfg,
        options,
        |k| matches!(k, ExperimentKind::TestSize | ExperimentKind::TestPower { .. }),
        "test_size or test_power",
    )
}
