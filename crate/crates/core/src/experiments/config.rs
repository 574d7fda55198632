use serde::{Deserialize, Serialize};

use crate::ar::{stability, ParamVector};
use crate::error::{Error, Result};
use crate::noise::CovarianceKernel;

/// Which asymptotic property to exercise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Median estimation error against `n` and its log-log slope.
    Consistency,
    /// Spread and normality of `sqrt(n) (theta_hat - theta)`.
    Clt,
    /// Running `(1 / log n) sum_k (theta_hat_k - theta)(theta_hat_k - theta)^T`
    /// along single paths.
    Qsl,
    /// Scaled fluctuations `sqrt(n / (2 log log n)) <v, theta_hat_n - theta>`
    /// along single paths. `v` defaults to the first unit vector.
    Lil {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        direction: Option<Vec<f64>>,
    },
    /// Remainder of the local expansion at `theta + u / sqrt(n)`.
    LanRemainder { u: Vec<f64> },
    /// Rejection rate of the LR test when `theta` is true.
    TestSize,
    /// Rejection rate of the LR test of `theta` when `theta + u / sqrt(n)` is true.
    TestPower { u: Vec<f64> },
}

impl ExperimentKind {
    /// Single-trajectory experiments read every sample size off one long path.
    pub fn is_path_based(&self) -> bool {
        matches!(self, ExperimentKind::Qsl | ExperimentKind::Lil { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Consistency => "consistency",
            ExperimentKind::Clt => "clt",
            ExperimentKind::Qsl => "qsl",
            ExperimentKind::Lil { .. } => "lil",
            ExperimentKind::LanRemainder { .. } => "lan_remainder",
            ExperimentKind::TestSize => "test_size",
            ExperimentKind::TestPower { .. } => "test_power",
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub theta: ParamVector,
    pub kernel: CovarianceKernel,
    pub sample_sizes: Vec<usize>,
    /// Independent replicates per sample size, or independent paths for the
    /// single-trajectory experiments.
    pub replicates: usize,
    pub seed: u64,
    pub experiment: ExperimentKind,
    /// Level of the LR test.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

/// Smallest sample size at which `log log n > 0` comfortably.
pub const LIL_MIN_SIZE: usize = 16;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn order(&self) -> usize {
        self.theta.order()
    }

    /// `v` for the LIL experiment.
    pub fn lil_direction(&self) -> Vec<f64> {
        match &self.experiment {
            ExperimentKind::Lil {
                direction: Some(v),
            } => v.clone(),
            _ => {
                let mut v = vec![0.0; self.order()];
                v[0] = 1.0;
                v
            }
        }
    }

    /// The local shift `u`, if the experiment has one.
    pub fn local_shift(&self) -> Option<&[f64]> {
        match &self.experiment {
            ExperimentKind::LanRemainder { u } | ExperimentKind::TestPower { u } => Some(u),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let p = self.order();
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.sample_sizes.is_empty() {
            return bad("sample_sizes must not be empty".into());
        }
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n < p + 2) {
            return bad(format!("sample size {n} is below p + 2 = {}", p + 2));
        }
        if self.sample_sizes.len() > 1 << 16 {
            return bad("too many sample sizes".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        let report = stability(&self.theta)?;
        if !report.stable {
            return bad(format!(
                "theta is not stable (spectral radius {})",
                report.spectral_radius()
            ));
        }
        let increasing = self.sample_sizes.windows(2).all(|w| w[0] < w[1]);
        match &self.experiment {
            ExperimentKind::Consistency if self.sample_sizes.len() < 2 => {
                return bad("consistency needs at least two sample sizes".into());
            }
            ExperimentKind::Qsl | ExperimentKind::Lil { .. } if !increasing => {
                return bad("path experiments need strictly increasing sample sizes".into());
            }
            ExperimentKind::Lil { .. } if self.sample_sizes[0] < LIL_MIN_SIZE => {
                return bad(format!("LIL sample sizes must be at least {LIL_MIN_SIZE}"));
            }
            _ => {}
        }
        if let ExperimentKind::Lil {
            direction: Some(v),
        } = &self.experiment
        {
            check_vector("direction", v, p)?;
            if v.iter().all(|&x| x == 0.0) {
                return bad("direction must be non-zero".into());
            }
        }
        if let Some(u) = self.local_shift() {
            check_vector("u", u, p)?;
            let n_min = *self.sample_sizes.iter().min().expect("non-empty");
            let local = self.theta.shifted(u, 1.0 / (n_min as f64).sqrt())?;
            if !stability(&local)?.stable {
                return bad(format!("theta + u / sqrt({n_min}) is not stable"));
            }
        }
        Ok(())
    }
}

fn check_vector(name: &str, v: &[f64], p: usize) -> Result<()> {
    if v.len() != p {
        return Err(Error::InvalidConfig(format!(
            "{name} has length {}, expected {p}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(format!("{name} must be finite")));
    }
    Ok(())
}

/// Order in which replicate tasks are handed to the worker pool. Results
/// never depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TaskOrder {
    #[default]
    Natural,
    Reversed,
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 1 runs on the calling thread.
    pub jobs: usize,
    pub order: TaskOrder,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            order: TaskOrder::Natural,
        }
    }
}
