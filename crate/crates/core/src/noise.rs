//! Stationary Gaussian noise: covariance families, validation and exact sampling.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::innovations::FilterState;
use crate::rng::NormalStream;

/// Floor on innovation variances (and on `1 - beta^2`) below which the
/// covariance is treated as singular.
pub const PD_EPS: f64 = 1e-12;

/// Lag at which the fGn covariance switches from the closed form to its
/// large-lag series, avoiding cancellation between the three power terms.
const FGN_SERIES_LAG: u64 = 32;

/// Unit-variance covariance family of the nuisance process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub enum CovarianceKernel {
    /// Independent noise.
    White,
    /// Markov noise with `r(k) = a^k`, `|a| < 1`.
    Ar1Corr { a: f64 },
    /// Fractional Gaussian noise with Hurst index in `(0, 1)`.
    Fgn { hurst: f64 },
}

/// Wire form: `{"family": "...", "params": {...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "lowercase")]
enum KernelSpec {
    White {},
    Ar1 { a: f64 },
    Fgn { hurst: f64 },
}

impl TryFrom<KernelSpec> for CovarianceKernel {
    type Error = Error;

    fn try_from(spec: KernelSpec) -> Result<Self> {
        match spec {
            KernelSpec::White {} => Ok(CovarianceKernel::White),
            KernelSpec::Ar1 { a } => CovarianceKernel::ar1(a),
            KernelSpec::Fgn { hurst } => CovarianceKernel::fgn(hurst),
        }
    }
}

impl From<CovarianceKernel> for KernelSpec {
    fn from(kernel: CovarianceKernel) -> Self {
        match kernel {
            CovarianceKernel::White => KernelSpec::White {},
            CovarianceKernel::Ar1Corr { a } => KernelSpec::Ar1 { a },
            CovarianceKernel::Fgn { hurst } => KernelSpec::Fgn { hurst },
        }
    }
}

impl CovarianceKernel {
    /// Variance at lag zero. Every family is normalised to one.
    pub const R0: f64 = 1.0;

    pub fn ar1(a: f64) -> Result<Self> {
        if !a.is_finite() || a.abs() >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "AR(1) noise correlation must satisfy |a| < 1, got {a}"
            )));
        }
        Ok(CovarianceKernel::Ar1Corr { a })
    }

    pub fn fgn(hurst: f64) -> Result<Self> {
        if !hurst.is_finite() || hurst <= 0.0 || hurst >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "Hurst index must lie in (0, 1), got {hurst}"
            )));
        }
        Ok(CovarianceKernel::Fgn { hurst })
    }

    /// Autocovariance `r(lag)`.
    pub fn covariance(&self, lag: u64) -> f64 {
        match *self {
            CovarianceKernel::White => {
                if lag == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            // Left-folded products so that r(k) = r(k-1) * a holds bit for
            // bit; the filter then finds beta_n = 0 exactly for n >= 2.
            CovarianceKernel::Ar1Corr { a } => (0..lag).fold(1.0, |acc, _| acc * a),
            CovarianceKernel::Fgn { hurst } => fgn_covariance(hurst, lag),
        }
    }

    /// `r(0..=max_lag)`.
    pub fn autocovariances(&self, max_lag: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(max_lag + 1);
        self.extend_autocovariances(&mut out, max_lag + 1);
        out
    }

    /// Grows `cache = r(0..len)` to length `len`, in O(1) per lag.
    pub fn extend_autocovariances(&self, cache: &mut Vec<f64>, len: usize) {
        while cache.len() < len {
            let lag = cache.len();
            let next = match (self, cache.last()) {
                (CovarianceKernel::Ar1Corr { a }, Some(prev)) => prev * a,
                _ => self.covariance(lag as u64),
            };
            cache.push(next);
        }
    }
}

fn fgn_covariance(hurst: f64, lag: u64) -> f64 {
    let two_h = 2.0 * hurst;
    if lag == 0 {
        return 1.0;
    }
    let k = lag as f64;
    if lag < FGN_SERIES_LAG {
        return 0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).powf(two_h));
    }
    // k^{2H} * sum_{j>=1} C(2H, 2j) k^{-2j}
    let inv_k2 = 1.0 / (k * k);
    let mut binom = 1.0;
    let mut power = 1.0;
    let mut sum = 0.0;
    for m in 1..=80u32 {
        binom *= (two_h - f64::from(m) + 1.0) / f64::from(m);
        if m % 2 == 1 {
            continue;
        }
        power *= inv_k2;
        let term = binom * power;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    k.powf(two_h) * sum
}

impl fmt::Display for CovarianceKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovarianceKernel::White => write!(f, "white"),
            CovarianceKernel::Ar1Corr { a } => write!(f, "ar1:{a}"),
            CovarianceKernel::Fgn { hurst } => write!(f, "fgn:{hurst}"),
        }
    }
}

/// Accepts either the JSON wire form or the shorthand `white`, `ar1:<a>`,
/// `fgn:<hurst>`.
impl FromStr for CovarianceKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return Ok(serde_json::from_str(s)?);
        }
        let (family, param) = match s.split_once(':') {
            Some((f, p)) => (f.trim(), Some(p.trim())),
            None => (s, None),
        };
        let parse = |p: Option<&str>| -> Result<f64> {
            let p = p.ok_or_else(|| {
                Error::InvalidArgument(format!("kernel `{family}` needs a parameter"))
            })?;
            p.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad kernel parameter `{p}`")))
        };
        match family.to_ascii_lowercase().as_str() {
            "white" if param.is_none() => Ok(CovarianceKernel::White),
            "ar1" => CovarianceKernel::ar1(parse(param)?),
            "fgn" => CovarianceKernel::fgn(parse(param)?),
            _ => Err(Error::InvalidArgument(format!("unknown kernel `{s}`"))),
        }
    }
}

/// Outcome of running the Durbin-Levinson recursion on a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kernel: CovarianceKernel,
    pub horizon: usize,
    pub min_sigma2: f64,
    pub max_abs_beta: f64,
    /// Fitted `a` in `beta_n^2 ~ n^{-a}` over the last three quarters of the
    /// horizon; `None` when the PACF vanishes there.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_decay_exponent: Option<f64>,
    /// Fitted `a` in `|r(n)| ~ n^{-a}` over the same window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance_decay_exponent: Option<f64>,
    /// Set when the covariance decay looks non-summable (`a < 1`) or the PACF
    /// decay is not faster than `n^{-1}` over the inspected horizon.
    pub slow_decay: bool,
}

/// Runs the recursion to `horizon` and summarises PACF and covariance decay.
pub fn validate_kernel(kernel: &CovarianceKernel, horizon: usize) -> Result<ValidationReport> {
    if horizon < 2 {
        return Err(Error::InvalidArgument(format!(
            "validation horizon must be at least 2, got {horizon}"
        )));
    }
    let mut state = FilterState::new(*kernel);
    while state.step() < horizon {
        state = state.advance().map_err(into_not_pd)?;
    }
    let sigma2 = state.sigma2();
    let (min_idx, min_sigma2) = sigma2
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if s < acc.1 { (i, s) } else { acc });
    if min_sigma2 <= PD_EPS {
        return Err(Error::NotPositiveDefinite {
            step: min_idx + 1,
            sigma2: min_sigma2,
        });
    }
    let betas = state.betas();
    let max_abs_beta = betas.iter().fold(0.0_f64, |m, b| m.max(b.abs()));

    let start = (horizon / 4).max(1);
    let beta_points: Vec<(f64, f64)> = (start..horizon)
        .map(|n| (n as f64, betas[n - 1] * betas[n - 1]))
        .collect();
    let beta_decay_exponent = decay_exponent(&beta_points);
    let autocov = kernel.autocovariances(horizon);
    let cov_points: Vec<(f64, f64)> = (start..=horizon)
        .map(|n| (n as f64, autocov[n].abs()))
        .collect();
    let covariance_decay_exponent = decay_exponent(&cov_points);

    let slow_decay = covariance_decay_exponent.is_some_and(|a| a < 1.0)
        || beta_decay_exponent.is_some_and(|a| a <= 1.0);

    Ok(ValidationReport {
        kernel: *kernel,
        horizon,
        min_sigma2,
        max_abs_beta,
        beta_decay_exponent,
        covariance_decay_exponent,
        slow_decay,
    })
}

/// Negated log-log least-squares slope over points with a positive ordinate.
fn decay_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, y)| *y > f64::MIN_POSITIVE && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 3 {
        return None;
    }
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

fn into_not_pd(err: Error) -> Error {
    match err {
        Error::Degenerate { step, beta } => Error::NotPositiveDefinite {
            step: step + 1,
            sigma2: 1.0 - beta * beta,
        },
        other => other,
    }
}

/// A sampled noise path `xi_1..xi_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub values: Vec<f64>,
    pub kernel: CovarianceKernel,
    pub seed: u64,
    pub stream: u64,
}

impl NoisePath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Single-column CSV with header `xi`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["xi"])?;
        for v in &self.values {
            w.write_record([v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact stationary Gaussian path of length `n` from stream 0 of `seed`.
pub fn sample_noise(kernel: &CovarianceKernel, n: usize, seed: u64) -> Result<NoisePath> {
    let mut source = NormalStream::new(seed, 0);
    sample_noise_from(kernel, n, &mut source)
}

/// Exact sampling by running the innovations filter forward: each value is
/// its best linear prediction from the past plus `sigma_m * eps_m`.
/// Consumes exactly `n` normals from `source`, in order.
pub fn sample_noise_from(
    kernel: &CovarianceKernel,
    n: usize,
    source: &mut NormalStream,
) -> Result<NoisePath> {
    if n == 0 {
        return Err(Error::InvalidArgument("noise length must be positive".into()));
    }
    let mut values = Vec::with_capacity(n);
    let mut state = FilterState::new(*kernel);
    for m in 1..=n {
        if m > 1 {
            state = state.advance().map_err(into_not_pd)?;
        }
        // sigma_m eps_m = sum_{i<m} k(m,i) xi_i + xi_m
        let past = state.past_combination(&values);
        let innovation = state.current_sigma2().sqrt() * source.next_normal();
        values.push(innovation - past);
    }
    Ok(NoisePath {
        values,
        kernel: *kernel,
        seed: source.seed(),
        stream: source.stream(),
    })
}
