use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::aggregate::aggregate;
use super::config::{ExperimentConfig, ExperimentKind, RunOptions, TaskOrder};
use super::raw::RawRow;
use super::report::{aggregate_curves, CurvePoint, ExperimentReport};
use crate::ar::{simulate_ar_from, stationary_information, ParamVector};
use crate::error::{Error, Result};
use crate::inference::{lan_decomposition, lr_test, mle, sequential_estimates};
use crate::noise::sample_noise_from;
use crate::rng::NormalStream;
use crate::state::build_zeta;

/// Points per single-path trajectory in `curves.csv`.
const TRAJECTORY_POINTS: usize = 120;

/// `(size slot, replicate)`; the slot is 0 for whole-path tasks.
type TaskKey = (usize, usize);

struct TaskOutput {
    rows: Vec<RawRow>,
    trajectory: Vec<CurvePoint>,
}

/// Runs the configured experiment. Replicates draw from their own
/// `(seed, replicate, size slot)` substreams and are merged by key, so the
/// result does not depend on `options`.
pub fn run(cfg: &ExperimentConfig, options: RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mut keys: Vec<TaskKey> = if cfg.experiment.is_path_based() {
        (0..cfg.replicates).map(|r| (0, r)).collect()
    } else {
        (0..cfg.sample_sizes.len())
            .flat_map(|j| (0..cfg.replicates).map(move |r| (j, r)))
            .collect()
    };
    match options.order {
        TaskOrder::Natural => {}
        TaskOrder::Reversed => keys.reverse(),
        TaskOrder::Shuffled(seed) => keys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
    }

    let total = keys.len();
    let done = AtomicUsize::new(0);
    let step = (total / 10).max(1);
    let work = |key: TaskKey| {
        let out = (key, run_task(cfg, key));
        let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
        if finished % step == 0 || finished == total {
            log::info!("{}: {finished}/{total} tasks", cfg.experiment.name());
        }
        out
    };
    let mut outputs: Vec<(TaskKey, Result<TaskOutput>)> = if options.jobs <= 1 {
        keys.into_iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
        pool.install(|| keys.into_par_iter().map(work).collect())
    };
    outputs.sort_by_key(|o| o.0);

    let mut raw = Vec::with_capacity(total);
    let mut trajectory = Vec::new();
    for (_, out) in outputs {
        let out = out?;
        raw.extend(out.rows);
        trajectory.extend(out.trajectory);
    }
    if cfg.experiment.is_path_based() {
        raw.sort_by_key(|r| (r.n, r.replicate));
    }
    let aggregates = aggregate(cfg, &raw)?;
    let mut curves = aggregate_curves(&aggregates);
    curves.extend(trajectory);
    let passed = aggregates.checks.iter().all(|c| c.passed);
    Ok(ExperimentReport {
        experiment: cfg.experiment.name().to_string(),
        config: cfg.clone(),
        aggregates,
        passed,
        runtime_secs: started.elapsed().as_secs_f64(),
        raw,
        curves,
    })
}

fn run_task(cfg: &ExperimentConfig, key: TaskKey) -> Result<TaskOutput> {
    let (rows, trajectory) = if cfg.experiment.is_path_based() {
        run_path(cfg, key.1)?
    } else {
        (vec![run_replicate(cfg, key.0, key.1)?], Vec::new())
    };
    Ok(TaskOutput {
        rows,
        trajectory,
    })
}

fn simulate(
    cfg: &ExperimentConfig,
    truth: &ParamVector,
    n: usize,
    replicate: usize,
    slot: usize,
) -> Result<crate::state::ZetaPath> {
    let mut stream = NormalStream::for_replicate(cfg.seed, replicate, slot);
    let noise = sample_noise_from(&cfg.kernel, n, &mut stream)?;
    let x = simulate_ar_from(truth, &noise.values);
    build_zeta(&x, &cfg.kernel, cfg.order())
}

/// One independent series of length `sample_sizes[slot]`.
fn run_replicate(cfg: &ExperimentConfig, slot: usize, replicate: usize) -> Result<RawRow> {
    let n = cfg.sample_sizes[slot];
    let truth = match &cfg.experiment {
        ExperimentKind::TestPower { u } => cfg.theta.shifted(u, 1.0 / (n as f64).sqrt())?,
        _ => cfg.theta.clone(),
    };
    let zeta = simulate(cfg, &truth, n, replicate, slot)?;
    let est = match mle(&zeta) {
        Ok(est) => est,
        Err(Error::SingularGram { .. }) => return Ok(RawRow::failed(replicate, n)),
        Err(e) => return Err(e),
    };
    let diff = est.theta_hat.to_dvector() - truth.to_dvector();
    let mut row = RawRow {
        replicate,
        n,
        theta_hat: Some(est.theta_hat.as_slice().to_vec()),
        error_norm: Some(diff.norm()),
        ..RawRow::default()
    };
    match &cfg.experiment {
        ExperimentKind::Clt => {
            let se = est.standard_errors()?;
            row.studentized = Some(diff.iter().zip(&se).map(|(d, s)| d / s).collect());
        }
        ExperimentKind::TestSize | ExperimentKind::TestPower { .. } => {
            let test = lr_test(&zeta, &cfg.theta, cfg.alpha)?;
            row.lr_statistic = Some(test.statistic);
            row.reject = Some(test.reject);
        }
        ExperimentKind::LanRemainder { u } => {
            row.lan_remainder = Some(lan_decomposition(&zeta, &cfg.theta, u)?.remainder);
        }
        _ => {}
    }
    Ok(row)
}

/// Log-spaced indices in `[from, to]`.
fn trajectory_grid(from: usize, to: usize) -> Vec<usize> {
    let (a, b) = ((from.max(1) as f64).ln(), (to as f64).ln());
    let mut grid: Vec<usize> = (0..TRAJECTORY_POINTS)
        .map(|i| (a + (b - a) * i as f64 / (TRAJECTORY_POINTS - 1) as f64).exp().round() as usize)
        .map(|k| k.clamp(from, to))
        .collect();
    grid.dedup();
    grid
}

/// One long path read at every configured size.
fn run_path(cfg: &ExperimentConfig, replicate: usize) -> Result<(Vec<RawRow>, Vec<CurvePoint>)> {
    let n_max = *cfg.sample_sizes.last().expect("validated non-empty");
    let zeta = simulate(cfg, &cfg.theta, n_max, replicate, 0)?;
    let estimates = sequential_estimates(&zeta);
    let theta = cfg.theta.to_dvector();
    let target = stationary_information(&cfg.theta)?.inverse()?;
    let error = |k: usize| -> Option<DVector<f64>> {
        estimates[k - 1].as_ref().map(|e| e - &theta)
    };
    let mut rows = Vec::with_capacity(cfg.sample_sizes.len());
    let mut series = Vec::with_capacity(n_max);

    match &cfg.experiment {
        ExperimentKind::Qsl => {
            let trace = target.trace();
            // running trace of sum_{k >= k0} (theta_hat_k - theta)(theta_hat_k - theta)^T
            let mut sum = 0.0;
            for k in 1..=n_max {
                // k0 is the first k with a usable Gram matrix, always k >= 2
                series.push(error(k).map(|e| {
                    sum += e.norm_squared();
                    sum / ((k as f64).ln() * trace)
                }));
            }
            for &n in &cfg.sample_sizes {
                rows.push(match series[n - 1] {
                    Some(r) => RawRow {
                        replicate,
                        n,
                        theta_hat: estimates[n - 1].as_ref().map(|e| e.iter().copied().collect()),
                        error_norm: error(n).map(|e| e.norm()),
                        qsl_ratio: Some(r),
                        ..RawRow::default()
                    },
                    None => RawRow::failed(replicate, n),
                });
            }
        }
        ExperimentKind::Lil { .. } => {
            let v = DVector::from_vec(cfg.lil_direction());
            let first = cfg.sample_sizes[0];
            let mut sup: f64 = 0.0;
            let mut sups = vec![None; n_max];
            series.resize(first - 1, None);
            for k in first..=n_max {
                let kf = k as f64;
                let scale = (kf / (2.0 * kf.ln().ln())).sqrt();
                let s = error(k).map(|e| scale * v.dot(&e));
                if let Some(s) = s {
                    sup = sup.max(s.abs());
                    sups[k - 1] = Some(sup);
                }
                series.push(s);
            }
            for &n in &cfg.sample_sizes {
                rows.push(match (series[n - 1], sups[n - 1]) {
                    (Some(s), Some(m)) => RawRow {
                        replicate,
                        n,
                        theta_hat: estimates[n - 1].as_ref().map(|e| e.iter().copied().collect()),
                        error_norm: error(n).map(|e| e.norm()),
                        lil_value: Some(s),
                        lil_sup: Some(m),
                        ..RawRow::default()
                    },
                    _ => RawRow::failed(replicate, n),
                });
            }
        }
        _ => unreachable!("only path experiments run here"),
    }

    let mut trajectory = Vec::new();
    if replicate == 0 {
        let label = format!("{}_path0", cfg.experiment.name());
        let from = series.iter().position(Option::is_some).unwrap_or(n_max - 1) + 1;
        for k in trajectory_grid(from, n_max) {
            if let Some(value) = series[k - 1] {
                trajectory.push(CurvePoint {
                    series: label.clone(),
                    n: k,
                    value,
                });
            }
        }
    }
    Ok((rows, trajectory))
}
