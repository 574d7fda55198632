use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use super::raw::RawRow;
use super::thresholds;
use crate::ar::stationary_information;
use crate::distributions::{
    chi2_cdf, chi2_quantile, ks_pvalue, ks_statistic, noncentral_chi2_sf, normal_cdf,
};
use crate::error::{Error, Result};
use crate::linalg::{quad_form, to_rows};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsSummary {
    pub label: String,
    pub statistic: f64,
    pub pvalue: f64,
}

/// Per-sample-size summary over the successful replicates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SizeAggregate {
    pub n: usize,
    pub count: usize,
    pub failed: usize,
    pub mean_theta_hat: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_error: Option<f64>,
    /// Sample covariance of `sqrt(n) (theta_hat - theta)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaled_covariance: Option<Vec<Vec<f64>>>,
    /// Diagonal of `scaled_covariance` over the diagonal of the limit covariance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_ratio: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub ks: Vec<KsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection_rate: Option<f64>,
    /// Limit rejection probability under the local alternative.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_rejection: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_abs_remainder: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_qsl_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_lil_sup: Option<f64>,
    /// Share of paths whose running sup stays within the allowed multiple of
    /// the envelope.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lil_pass_fraction: Option<f64>,
}

/// A pass/fail comparison of one statistic against its tolerance band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub upper: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lower: Some(lower),
            upper: Some(upper),
            passed: value >= lower && value <= upper,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, lower: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lower: Some(lower),
            upper: None,
            passed: value >= lower,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, lower: f64) -> Self {
        Self {
            passed: value > lower,
            ..Self::at_least(name, value, lower)
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, upper: f64) -> Self {
        Self {
            passed: value <= upper,
            ..Self::below(name, value, upper)
        }
    }

    pub fn below(name: impl Into<String>, value: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lower: None,
            upper: Some(upper),
            passed: value < upper,
        }
    }
}

/// Everything in a report that is a function of the config and raw rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub per_n: Vec<SizeAggregate>,
    /// Least-squares slope of log median error on log n.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    /// Limit covariance of `sqrt(n) (theta_hat - theta)`.
    pub target_covariance: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lil_envelope: Option<f64>,
    pub checks: Vec<Check>,
    pub failures: usize,
    pub total: usize,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn collect<T>(rows: &[&RawRow], f: impl Fn(&RawRow) -> Option<T>) -> Vec<T> {
    rows.iter().filter_map(|r| f(r)).collect()
}

/// Recomputes all aggregates and checks from raw rows. Rows may come in any
/// order; they are grouped by sample size and sorted by replicate first.
pub fn aggregate(cfg: &ExperimentConfig, rows: &[RawRow]) -> Result<Aggregates> {
    let p = cfg.order();
    let theta = cfg.theta.to_dvector();
    let info = stationary_information(&cfg.theta)?;
    let target = info.inverse()?;
    let total = rows.len();
    let failures = rows.iter().filter(|r| r.failed).count();
    if failures as f64 > thresholds::MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::TooManyFailures {
            failed: failures,
            total,
        });
    }
    let critical = chi2_quantile(p, cfg.alpha)?;
    let lil_envelope = match cfg.experiment {
        ExperimentKind::Lil { .. } => {
            let v = DVector::from_vec(cfg.lil_direction());
            Some(quad_form(&target, &v).sqrt())
        }
        _ => None,
    };

    let mut per_n = Vec::with_capacity(cfg.sample_sizes.len());
    for &n in &cfg.sample_sizes {
        let mut group: Vec<&RawRow> = rows.iter().filter(|r| r.n == n).collect();
        group.sort_by_key(|r| r.replicate);
        let ok: Vec<&RawRow> = group.iter().copied().filter(|r| !r.failed).collect();
        let mut agg = SizeAggregate {
            n,
            count: ok.len(),
            failed: group.len() - ok.len(),
            ..SizeAggregate::default()
        };
        let hats: Vec<DVector<f64>> = collect(&ok, |r| r.theta_hat.clone().map(DVector::from_vec));
        if !hats.is_empty() {
            let mean = hats.iter().fold(DVector::zeros(p), |acc, h| acc + h) / hats.len() as f64;
            agg.mean_theta_hat = mean.iter().copied().collect();
        }
        agg.median_error = median(&collect(&ok, |r| r.error_norm));

        match &cfg.experiment {
            ExperimentKind::Clt if hats.len() >= 2 => {
                let scale = (n as f64).sqrt();
                let scaled: Vec<DVector<f64>> =
                    hats.iter().map(|h| (h - &theta) * scale).collect();
                let k = scaled.len() as f64;
                let m = scaled.iter().fold(DVector::zeros(p), |acc, s| acc + s) / k;
                let cov = scaled.iter().fold(DMatrix::zeros(p, p), |acc, s| {
                    let d = s - &m;
                    acc + &d * d.transpose()
                }) / (k - 1.0);
                agg.variance_ratio = Some((0..p).map(|j| cov[(j, j)] / target[(j, j)]).collect());
                agg.scaled_covariance = Some(to_rows(&cov));
                let z: Vec<Vec<f64>> = collect(&ok, |r| r.studentized.clone());
                for j in 0..p {
                    let sample: Vec<f64> = z.iter().map(|v| v[j]).collect();
                    let d = ks_statistic(&sample, normal_cdf);
                    agg.ks.push(KsSummary {
                        label: format!("studentized_{}", j + 1),
                        statistic: d,
                        pvalue: ks_pvalue(sample.len(), d),
                    });
                }
            }
            ExperimentKind::TestSize | ExperimentKind::TestPower { .. } => {
                let rejects = collect(&ok, |r| r.reject);
                if !rejects.is_empty() {
                    let hits = rejects.iter().filter(|&&b| b).count();
                    agg.rejection_rate = Some(hits as f64 / rejects.len() as f64);
                }
                let lr = collect(&ok, |r| r.lr_statistic);
                if let ExperimentKind::TestPower { u } = &cfg.experiment {
                    let u = DVector::from_column_slice(u);
                    let shift = quad_form(info.matrix(), &u);
                    agg.predicted_rejection = Some(noncentral_chi2_sf(p, shift, critical));
                } else {
                    agg.predicted_rejection = Some(cfg.alpha);
                    if !lr.is_empty() {
                        let d = ks_statistic(&lr, |x| chi2_cdf(p, x));
                        agg.ks.push(KsSummary {
                            label: "lr_statistic".into(),
                            statistic: d,
                            pvalue: ks_pvalue(lr.len(), d),
                        });
                    }
                }
            }
            ExperimentKind::LanRemainder { .. } => {
                let abs: Vec<f64> = collect(&ok, |r| r.lan_remainder.map(f64::abs));
                agg.median_abs_remainder = median(&abs);
            }
            ExperimentKind::Qsl => {
                agg.median_qsl_ratio = median(&collect(&ok, |r| r.qsl_ratio));
            }
            ExperimentKind::Lil { .. } => {
                let sups = collect(&ok, |r| r.lil_sup);
                agg.median_lil_sup = median(&sups);
                if let (Some(env), false) = (lil_envelope, sups.is_empty()) {
                    let bound = thresholds::LIL_ENVELOPE_FACTOR * env;
                    let inside = sups.iter().filter(|&&s| s <= bound).count();
                    agg.lil_pass_fraction = Some(inside as f64 / sups.len() as f64);
                }
            }
            _ => {}
        }
        per_n.push(agg);
    }

    let slope = match cfg.experiment {
        ExperimentKind::Consistency => {
            let points: Vec<(f64, f64)> = per_n
                .iter()
                .filter_map(|a| {
                    a.median_error
                        .filter(|&e| e > 0.0)
                        .map(|e| ((a.n as f64).ln(), e.ln()))
                })
                .collect();
            ols_slope(&points)
        }
        _ => None,
    };
    let checks = checks(cfg, &per_n, slope);
    if let Some(c) = checks.iter().find(|c| !c.value.is_finite()) {
        return Err(Error::NonFinite(format!("check {}", c.name)));
    }
    Ok(Aggregates {
        per_n,
        slope,
        target_covariance: to_rows(&target),
        lil_envelope,
        checks,
        failures,
        total,
    })
}

fn checks(cfg: &ExperimentConfig, per_n: &[SizeAggregate], slope: Option<f64>) -> Vec<Check> {
    use thresholds::*;
    let mut out = Vec::new();
    let last = per_n.last().expect("at least one sample size");
    match &cfg.experiment {
        ExperimentKind::Consistency => {
            let (lo, hi) = SLOPE_RANGE;
            out.push(Check::within("error_slope", slope.unwrap_or(f64::NAN), lo, hi));
        }
        ExperimentKind::Clt => {
            for a in per_n {
                for (j, r) in a.variance_ratio.iter().flatten().enumerate() {
                    let name = format!("variance_ratio[n={},j={}]", a.n, j + 1);
                    out.push(Check::within(name, *r, 1.0 - VARIANCE_TOL, 1.0 + VARIANCE_TOL));
                }
                for ks in &a.ks {
                    let name = format!("ks_pvalue[n={},{}]", a.n, ks.label);
                    out.push(Check::at_least(name, ks.pvalue, KS_LEVEL));
                }
            }
        }
        ExperimentKind::TestSize => {
            for a in per_n {
                let rate = a.rejection_rate.unwrap_or(f64::NAN);
                let name = format!("size[n={}]", a.n);
                out.push(Check::within(name, rate, cfg.alpha - SIZE_TOL, cfg.alpha + SIZE_TOL));
                for ks in &a.ks {
                    let name = format!("ks_pvalue[n={},{}]", a.n, ks.label);
                    out.push(Check::at_least(name, ks.pvalue, KS_LEVEL));
                }
            }
        }
        ExperimentKind::TestPower { .. } => {
            for a in per_n {
                let rate = a.rejection_rate.unwrap_or(f64::NAN);
                let pred = a.predicted_rejection.unwrap_or(f64::NAN);
                let name = format!("power[n={}]", a.n);
                out.push(Check::within(name, rate, pred - POWER_TOL, pred + POWER_TOL));
            }
        }
        ExperimentKind::LanRemainder { .. } => {
            let medians: Vec<f64> = per_n
                .iter()
                .map(|a| a.median_abs_remainder.unwrap_or(f64::NAN))
                .collect();
            let rise = medians
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::NEG_INFINITY, f64::max);
            if medians.len() > 1 {
                out.push(Check::at_most("median_remainder_increase", rise, 0.0));
            }
            let name = format!("median_abs_remainder[n={}]", last.n);
            let value = last.median_abs_remainder.unwrap_or(f64::NAN);
            out.push(Check::below(name, value, LAN_MEDIAN_MAX));
        }
        ExperimentKind::Qsl => {
            let (lo, hi) = QSL_RANGE;
            let name = format!("median_qsl_ratio[n={}]", last.n);
            out.push(Check::within(name, last.median_qsl_ratio.unwrap_or(f64::NAN), lo, hi));
        }
        ExperimentKind::Lil { .. } => {
            let name = format!("lil_pass_fraction[n={}]", last.n);
            let value = last.lil_pass_fraction.unwrap_or(f64::NAN);
            out.push(Check::above(name, value, LIL_MAJORITY));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_slope() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        let pts: Vec<(f64, f64)> = (1..6).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        assert!((ols_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(ols_slope(&pts[..1]), None);
    }

    #[test]
    fn check_bounds() {
        assert!(Check::within("a", 1.0, 1.0, 2.0).passed);
        assert!(!Check::within("a", f64::NAN, 1.0, 2.0).passed);
        assert!(!Check::above("a", 0.5, 0.5).passed);
        assert!(Check::at_least("a", 0.5, 0.5).passed);
        assert!(!Check::below("a", 0.05, 0.05).passed);
        assert!(Check::at_most("a", 0.0, 0.0).passed);
    }
}
