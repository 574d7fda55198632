//! Reference distributions for the test statistics and goodness-of-fit checks.
//!
//! Incomplete gamma and error functions come from `statrs`; quantile
//! inversion, the noncentral chi-square series and the Kolmogorov-Smirnov
//! machinery are implemented here.

use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn chi2_cdf(dof: usize, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(dof as f64 / 2.0, x / 2.0)
    }
}

/// `P(chi2_dof >= x)`.
pub fn chi2_sf(dof: usize, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(dof as f64 / 2.0, x / 2.0)
    }
}

/// Upper quantile: the `x` with `P(chi2_dof >= x) = alpha`.
///
/// Bracketed bisection on the survival function, stopped once the bracket
/// is narrower than `1e-12 * max(1, x)`.
pub fn chi2_quantile(dof: usize, alpha: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::InvalidArgument("degrees of freedom must be positive".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "level must lie in (0, 1), got {alpha}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = dof as f64 + 1.0;
    while chi2_sf(dof, hi) > alpha {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if chi2_sf(dof, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `P(X >= c)` for `X ~ noncentral chi2(dof, noncentrality)`, as a Poisson
/// mixture of central chi-square tails.
pub fn noncentral_chi2_sf(dof: usize, noncentrality: f64, c: f64) -> f64 {
    if noncentrality <= 0.0 {
        return chi2_sf(dof, c);
    }
    let half = 0.5 * noncentrality;
    let spread = (half + 1.0).sqrt();
    let last = (half + 40.0 * spread + 40.0).ceil() as usize;
    let mut total = 0.0;
    for j in 0..=last {
        let log_w = -half + j as f64 * half.ln() - ln_gamma(j as f64 + 1.0);
        let w = log_w.exp();
        if w == 0.0 {
            continue;
        }
        total += w * chi2_sf(dof + 2 * j, c);
    }
    total.clamp(0.0, 1.0)
}

/// Kolmogorov-Smirnov statistic `sup |F_n - F|` of a sample against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut sorted: Vec<f64> = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let upper = (i as f64 + 1.0) / n - f;
            let lower = f - i as f64 / n;
            upper.max(lower)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a one-sample KS statistic `d` from `n` points,
/// with Stephens' small-sample correction.
pub fn ks_pvalue(n: usize, d: f64) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
