//! Closed-form MLE, likelihood-ratio test, LAN decomposition and confidence
//! ellipsoids.
//!
//! The log-likelihood is an exact quadratic in `theta`, so the MLE solves
//! `<M>_n theta = moment` and
//! `2 (log L(theta_hat) - log L(theta_0)) = M_n(theta_0)^T <M>_n^{-1} M_n(theta_0)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ar::{stability, stationary_information, ParamVector};
use crate::distributions::{chi2_quantile, chi2_sf};
use crate::error::{Error, Result};
use crate::linalg::{quad_form, spd_condition, symmetrize};
use crate::state::{accumulate, log_likelihood, MartingaleAccumulator, ZetaPath};

/// Gram matrices with a larger condition estimate are treated as singular.
pub const GRAM_CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub theta_hat: ParamVector,
    /// `<M>_n`.
    pub gram: DMatrix<f64>,
    pub moment: DVector<f64>,
    pub n: usize,
    /// Ratio of extreme eigenvalues of the Gram matrix.
    pub cond: f64,
}

impl EstimationResult {
    pub fn gram_over_n(&self) -> DMatrix<f64> {
        &self.gram / self.n as f64
    }

    /// Plug-in standard errors `sqrt(diag(<M>_n^{-1}))`.
    pub fn standard_errors(&self) -> Result<Vec<f64>> {
        let inv = spd_inverse(&self.gram)?;
        Ok((0..inv.nrows()).map(|i| inv[(i, i)].sqrt()).collect())
    }

    /// `||<M>_n theta_hat - moment||`.
    pub fn residual(&self) -> f64 {
        (&self.gram * self.theta_hat.to_dvector() - &self.moment).norm()
    }
}

fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m.clone().cholesky().ok_or(Error::SingularGram {
        cond: spd_condition(m),
    })?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// SPD solve of `gram x = rhs`, refusing ill-conditioned systems.
fn solve_gram(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let cond = spd_condition(gram);
    if !(cond <= GRAM_CONDITION_CAP) {
        return Err(Error::SingularGram { cond });
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or(Error::SingularGram { cond })?;
    Ok((chol.solve(rhs), cond))
}

pub fn mle_from_accumulator(acc: &MartingaleAccumulator) -> Result<EstimationResult> {
    let (theta, cond) = solve_gram(&acc.gram, &acc.moment)?;
    let theta_hat = ParamVector::new(theta.iter().copied().collect())
        .map_err(|_| Error::NonFinite("MLE".into()))?;
    Ok(EstimationResult {
        theta_hat,
        gram: acc.gram.clone(),
        moment: acc.moment.clone(),
        n: acc.n,
        cond,
    })
}

/// `theta_hat = <M>_n^{-1} moment`.
pub fn mle(zeta: &ZetaPath) -> Result<EstimationResult> {
    mle_from_accumulator(&MartingaleAccumulator::from_path(zeta))
}

/// `2 (log L(theta_hat) - log L(theta_0))` from two likelihood evaluations.
pub fn lr_statistic(zeta: &ZetaPath, theta0: &ParamVector) -> Result<f64> {
    let est = mle(zeta)?;
    let at_hat = log_likelihood(zeta, &est.theta_hat)?;
    let at_null = log_likelihood(zeta, theta0)?;
    Ok(2.0 * (at_hat - at_null))
}

/// `M_n(theta_0)^T <M>_n^{-1} M_n(theta_0)`, the score form of the LR statistic.
pub fn score_statistic(zeta: &ZetaPath, theta0: &ParamVector) -> Result<f64> {
    let (acc, score) = accumulate(zeta, theta0)?;
    let (x, _) = solve_gram(&acc.gram, &score)?;
    Ok(score.dot(&x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub critical: f64,
    pub alpha: f64,
    pub dof: usize,
    pub reject: bool,
    pub pvalue: f64,
}

/// Likelihood-ratio test of `theta = theta_0`, rejecting when the statistic
/// reaches the upper `alpha`-quantile of chi-square with `p` degrees of freedom.
pub fn lr_test(zeta: &ZetaPath, theta0: &ParamVector, alpha: f64) -> Result<TestResult> {
    let statistic = lr_statistic(zeta, theta0)?;
    decide(statistic, theta0.order(), alpha)
}

pub fn decide(statistic: f64, dof: usize, alpha: f64) -> Result<TestResult> {
    let critical = chi2_quantile(dof, alpha)?;
    let clipped = statistic.max(0.0);
    Ok(TestResult {
        statistic,
        critical,
        alpha,
        dof,
        reject: clipped >= critical,
        pvalue: chi2_sf(dof, clipped).clamp(0.0, 1.0),
    })
}

/// Terms of the local expansion of `log L(theta_0 + u / sqrt(n)) - log L(theta_0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanDecomposition {
    /// `<u, M_n / sqrt(n)>`.
    pub score_term: f64,
    /// `-1/2 <u, I(theta_0) u>`.
    pub info_term: f64,
    /// `-1/2 <u, (<M>_n / n - I(theta_0)) u>`.
    pub remainder: f64,
    /// Direct difference of the two log-likelihoods.
    pub log_likelihood_ratio: f64,
}

impl LanDecomposition {
    pub fn sum(&self) -> f64 {
        self.score_term + self.info_term + self.remainder
    }
}

/// `I(theta_0)` here is the limit of `<M>_n / n`, see
/// [`stationary_information`].
pub fn lan_decomposition(
    zeta: &ZetaPath,
    theta0: &ParamVector,
    u: &[f64],
) -> Result<LanDecomposition> {
    let n = zeta.len() as f64;
    let local = theta0.shifted(u, 1.0 / n.sqrt())?;
    for point in [theta0, &local] {
        let report = stability(point)?;
        if !report.stable {
            return Err(Error::Unstable {
                spectral_radius: report.spectral_radius(),
            });
        }
    }
    let info = stationary_information(theta0)?;
    let (acc, score) = accumulate(zeta, theta0)?;
    let u = DVector::from_column_slice(u);
    let score_term = u.dot(&score) / n.sqrt();
    let info_term = -0.5 * quad_form(info.matrix(), &u);
    let remainder = -0.5 * quad_form(&(&acc.gram / n - info.matrix()), &u);
    let log_likelihood_ratio = log_likelihood(zeta, &local)? - log_likelihood(zeta, theta0)?;
    Ok(LanDecomposition {
        score_term,
        info_term,
        remainder,
        log_likelihood_ratio,
    })
}

/// Source of the information matrix in confidence regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InformationPlugin {
    /// `<M>_n / n`.
    #[default]
    Empirical,
    /// Limit information evaluated at `theta_hat`.
    Model,
}

/// `{theta : (theta_hat - theta)^T shape (theta_hat - theta) <= radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceEllipsoid {
    pub center: DVector<f64>,
    /// `n` times the plug-in information.
    pub shape: DMatrix<f64>,
    /// Upper `alpha`-quantile of chi-square with `p` degrees of freedom.
    pub radius: f64,
}

impl ConfidenceEllipsoid {
    pub fn contains(&self, theta: &[f64]) -> bool {
        let d = &self.center - DVector::from_column_slice(theta);
        quad_form(&self.shape, &d) <= self.radius
    }

    /// Half-lengths of the bounding box along each coordinate.
    pub fn half_widths(&self) -> Result<Vec<f64>> {
        let inv = spd_inverse(&self.shape)?;
        Ok((0..inv.nrows())
            .map(|i| (self.radius * inv[(i, i)]).sqrt())
            .collect())
    }
}

pub fn confidence_ellipsoid(
    result: &EstimationResult,
    alpha: f64,
    plugin: InformationPlugin,
) -> Result<ConfidenceEllipsoid> {
    let p = result.theta_hat.order();
    let radius = chi2_quantile(p, alpha)?;
    let n = result.n as f64;
    let info = match plugin {
        InformationPlugin::Empirical => result.gram_over_n(),
        InformationPlugin::Model => stationary_information(&result.theta_hat)?.into_matrix(),
    };
    if !(spd_condition(&info) <= GRAM_CONDITION_CAP) {
        return Err(Error::SingularGram {
            cond: spd_condition(&info),
        });
    }
    Ok(ConfidenceEllipsoid {
        center: result.theta_hat.to_dvector(),
        shape: info * n,
        radius,
    })
}

/// `theta_hat_k` for `k = 1..=n` from incremental Gram updates; `None` until
/// the Gram matrix is well conditioned.
pub fn sequential_estimates(zeta: &ZetaPath) -> Vec<Option<DVector<f64>>> {
    let mut acc = MartingaleAccumulator::new(zeta.order());
    let mut out = Vec::with_capacity(zeta.len());
    for _ in 0..zeta.len() {
        acc.push(zeta);
        out.push(solve_gram(&acc.gram, &acc.moment).ok().map(|(x, _)| x));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar::simulate_ar;
    use crate::noise::{sample_noise, CovarianceKernel};
    use crate::state::build_zeta;
    use proptest::prelude::*;

    fn path_for(theta: &[f64], kernel: &CovarianceKernel, n: usize, seed: u64) -> ZetaPath {
        let theta = ParamVector::new(theta.to_vec()).unwrap();
        let x = simulate_ar(&theta, &sample_noise(kernel, n, seed).unwrap());
        build_zeta(&x, kernel, theta.order()).unwrap()
    }

    /// Least squares of `x_m` on `(x_{m-1}, ..., x_{m-p})` with zero presample.
    fn ols(x: &[f64], p: usize) -> DVector<f64> {
        let n = x.len();
        let design = DMatrix::from_fn(n, p, |m, j| if m > j { x[m - 1 - j] } else { 0.0 });
        let y = DVector::from_column_slice(x);
        (design.transpose() * &design)
            .cholesky()
            .unwrap()
            .solve(&(design.transpose() * y))
    }

    #[test]
    fn white_noise_mle_is_least_squares() {
        let theta = ParamVector::new(vec![0.5, -0.3]).unwrap();
        let x = simulate_ar(&theta, &sample_noise(&CovarianceKernel::White, 400, 4).unwrap());
        let est = mle(&build_zeta(&x, &CovarianceKernel::White, 2).unwrap()).unwrap();
        let want = ols(&x, 2);
        for (a, b) in est.theta_hat.as_slice().iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(est.residual() < 1e-9);
    }

    #[test]
    fn lr_equals_score_quadratic_form() {
        let kernel = CovarianceKernel::fgn(0.8).unwrap();
        let zeta = path_for(&[0.4, 0.2], &kernel, 500, 7);
        for theta0 in [vec![0.4, 0.2], vec![0.0, 0.0], vec![0.6, -0.1]] {
            let theta0 = ParamVector::new(theta0).unwrap();
            let lr = lr_statistic(&zeta, &theta0).unwrap();
            let sc = score_statistic(&zeta, &theta0).unwrap();
            assert!((lr - sc).abs() < 1e-8 * sc.abs().max(1.0), "{lr} vs {sc}");
        }
        let est = mle(&zeta).unwrap();
        assert!(lr_statistic(&zeta, &est.theta_hat).unwrap().abs() < 1e-8);
    }

    #[test]
    fn local_expansion_is_exact() {
        let kernel = CovarianceKernel::ar1(0.5).unwrap();
        let zeta = path_for(&[0.3], &kernel, 2000, 3);
        let theta0 = ParamVector::new(vec![0.3]).unwrap();
        let lan = lan_decomposition(&zeta, &theta0, &[1.5]).unwrap();
        assert!((lan.sum() - lan.log_likelihood_ratio).abs() < 1e-9);
        // p = 1: I = 1 / (1 - theta^2)
        let info = 1.0 / (1.0 - 0.09);
        assert!((lan.info_term + 0.5 * 2.25 * info).abs() < 1e-12);
        assert!(lan.remainder.abs() < 0.2);
    }

    #[test]
    fn local_expansion_rejects_unstable_points() {
        let zeta = path_for(&[0.3], &CovarianceKernel::White, 100, 3);
        let theta0 = ParamVector::new(vec![0.95]).unwrap();
        assert!(matches!(
            lan_decomposition(&zeta, &theta0, &[1.0]),
            Err(Error::Unstable { .. })
        ));
        assert!(matches!(
            lan_decomposition(&zeta, &theta0, &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constant_zero_path_is_singular() {
        let zeta = build_zeta(&[0.0; 30], &CovarianceKernel::White, 1).unwrap();
        assert!(matches!(mle(&zeta), Err(Error::SingularGram { .. })));
        let theta0 = ParamVector::new(vec![0.1]).unwrap();
        assert!(matches!(lr_test(&zeta, &theta0, 0.05), Err(Error::SingularGram { .. })));
    }

    #[test]
    fn decision_rule() {
        let t = decide(3.9, 1, 0.05).unwrap();
        assert!(t.reject);
        assert!((t.critical - 3.841458820694124).abs() < 1e-9);
        let t = decide(-1e-13, 1, 0.05).unwrap();
        assert!(!t.reject);
        assert_eq!(t.pvalue, 1.0);
        assert!(decide(1.0, 1, 1.5).is_err());
    }

    #[test]
    fn scalar_ellipsoid_is_an_interval() {
        let zeta = path_for(&[0.4], &CovarianceKernel::ar1(0.3).unwrap(), 800, 21);
        let est = mle(&zeta).unwrap();
        let ell = confidence_ellipsoid(&est, 0.05, InformationPlugin::Empirical).unwrap();
        let hw = ell.half_widths().unwrap()[0];
        let z = 1.959963984540054;
        let want = z / (est.gram[(0, 0)]).sqrt();
        assert!((hw - want).abs() < 1e-9);
        let c = est.theta_hat.as_slice()[0];
        assert!(ell.contains(&[c + 0.999 * hw]));
        assert!(!ell.contains(&[c + 1.001 * hw]));
        let model = confidence_ellipsoid(&est, 0.05, InformationPlugin::Model).unwrap();
        let c0 = est.theta_hat.as_slice()[0];
        assert!((model.shape[(0, 0)] - 800.0 / (1.0 - c0 * c0)).abs() < 1e-8);
    }

    #[test]
    fn sequential_estimates_end_at_mle() {
        let zeta = path_for(&[0.2, 0.3], &CovarianceKernel::fgn(0.6).unwrap(), 300, 8);
        let seq = sequential_estimates(&zeta);
        assert_eq!(seq.len(), 300);
        assert!(seq[0].is_none());
        let last = seq.last().unwrap().as_ref().unwrap();
        let est = mle(&zeta).unwrap();
        assert!((last - est.theta_hat.to_dvector()).norm() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn lr_is_nonnegative_and_matches_quadratic_form(
            seed in 0u64..10_000, t in -0.8f64..0.8, t0 in -0.8f64..0.8, a in -0.7f64..0.7,
        ) {
            let kernel = CovarianceKernel::ar1(a).unwrap();
            let zeta = path_for(&[t], &kernel, 200, seed);
            let theta0 = ParamVector::new(vec![t0]).unwrap();
            let lr = lr_statistic(&zeta, &theta0).unwrap();
            let sc = score_statistic(&zeta, &theta0).unwrap();
            prop_assert!(sc >= 0.0);
            prop_assert!(lr > -1e-8);
            prop_assert!((lr - sc).abs() < 1e-8 * sc.max(1.0));
        }
    }
}
