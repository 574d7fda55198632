//! The filtered 2p-dimensional process and the exact likelihood built on it.
//!
//! `Z_m = sum_i k(m,i) Y_i` whitens the lag vectors `Y_i = (X_i, ..., X_{i-p+1})`
//! with the noise filter, and `zeta_m = (Z_m, sum_{k<m} beta_k Z_k)` evolves as
//! `zeta_m = Ã_{m-1} zeta_{m-1} + l sigma_m eps_m` with `zeta_0 = 0`. Only the
//! first coordinate of that recursion involves `theta`, through
//! `l^T Ã_{m-1} zeta_{m-1} = theta . w_{m-1}` where `w_m = a_m^T zeta_m =
//! zeta_m^(1) + beta_m zeta_m^(2)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::ar::{companion, ParamVector};
use crate::error::{Error, Result};
use crate::innovations::FilterState;
use crate::linalg::dot;
use crate::noise::CovarianceKernel;

/// `zeta_1..zeta_n` with the filter quantities needed to evaluate the
/// likelihood at any `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaPath {
    p: usize,
    /// Row-major `n x 2p`.
    zeta: Vec<f64>,
    /// `sigma_1..sigma_n`.
    sigma: Vec<f64>,
    /// `beta_1..beta_{n-1}`.
    beta: Vec<f64>,
}

impl ZetaPath {
    pub fn order(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// `zeta_m` for `1 <= m <= n`.
    pub fn zeta(&self, m: usize) -> &[f64] {
        let w = 2 * self.p;
        &self.zeta[(m - 1) * w..m * w]
    }

    pub fn sigma(&self, m: usize) -> f64 {
        self.sigma[m - 1]
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigma
    }

    /// `beta_m` for `1 <= m <= n - 1`.
    pub fn beta(&self, m: usize) -> f64 {
        self.beta[m - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    /// `a_m^T zeta_m`; zero for `m = 0`.
    pub fn lagged_regressor(&self, m: usize) -> Vec<f64> {
        if m == 0 {
            return vec![0.0; self.p];
        }
        let z = self.zeta(m);
        let b = self.beta(m);
        (0..self.p).map(|j| z[j] + b * z[self.p + j]).collect()
    }

    /// `l^T zeta_m`, the whitened current observation.
    pub fn response(&self, m: usize) -> f64 {
        self.zeta(m)[0]
    }

    fn check_order(&self, theta: &ParamVector) -> Result<()> {
        if theta.order() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: theta.order(),
            });
        }
        Ok(())
    }

    /// The first `m` steps, as if only `x_1..x_m` had been observed.
    pub fn truncated(&self, m: usize) -> ZetaPath {
        let m = m.min(self.len());
        ZetaPath {
            p: self.p,
            zeta: self.zeta[..m * 2 * self.p].to_vec(),
            sigma: self.sigma[..m].to_vec(),
            beta: self.beta[..m.saturating_sub(1)].to_vec(),
        }
    }

    /// CSV with columns `index, zeta_1..zeta_2p`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        header.extend((1..=2 * self.p).map(|j| format!("zeta_{j}")));
        w.write_record(&header)?;
        for m in 1..=self.len() {
            let mut rec = vec![m.to_string()];
            rec.extend(self.zeta(m).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds `zeta_1..zeta_n` from observations `x_1..x_n`.
pub fn build_zeta(x: &[f64], kernel: &CovarianceKernel, p: usize) -> Result<ZetaPath> {
    if p == 0 {
        return Err(Error::InvalidArgument("AR order must be at least 1".into()));
    }
    if x.len() <= p {
        return Err(Error::TooShort { len: x.len(), p });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("observation {}", i + 1)));
    }
    let n = x.len();
    let width = 2 * p;
    let mut zeta = vec![0.0; n * width];
    let mut sigma = Vec::with_capacity(n);
    let mut state = FilterState::new(*kernel);
    for m in 1..=n {
        if m > 1 {
            state = state.advance()?;
        }
        let base = (m - 1) * width;
        // Z_m[j] = sum_{i=j+1}^{m} k(m,i) X_{i-j}; earlier lags are zero.
        for j in 0..p {
            zeta[base + j] = state.apply_lagged(&x[..m], j);
        }
        if m > 1 {
            let prev = base - width;
            let b = state.betas()[m - 2];
            for j in 0..p {
                zeta[base + p + j] = zeta[prev + p + j] + b * zeta[prev + j];
            }
        }
        sigma.push(state.current_sigma2().sqrt());
    }
    // beta_n is not needed: a_n only multiplies zeta_n in step n + 1.
    let beta = state.betas().to_vec();
    Ok(ZetaPath {
        p,
        zeta,
        sigma,
        beta,
    })
}

/// `Ã_n = [[A_0, beta_n A_0], [beta_n Id, Id]]`.
pub fn transition(theta: &ParamVector, beta: f64) -> DMatrix<f64> {
    let p = theta.order();
    let a = companion(theta);
    let mut t = DMatrix::zeros(2 * p, 2 * p);
    t.view_mut((0, 0), (p, p)).copy_from(&a);
    t.view_mut((0, p), (p, p)).copy_from(&(&a * beta));
    for i in 0..p {
        t[(p + i, i)] = beta;
        t[(p + i, p + i)] = 1.0;
    }
    t
}

/// `eps_i(theta) = l^T (zeta_i - Ã_{i-1} zeta_{i-1}) / sigma_i` for `i = 1..=n`.
pub fn innovations_at(zeta: &ZetaPath, theta: &ParamVector) -> Result<Vec<f64>> {
    zeta.check_order(theta)?;
    let coeffs = theta.as_slice();
    Ok((1..=zeta.len())
        .map(|i| {
            let w = zeta.lagged_regressor(i - 1);
            (zeta.response(i) - dot(coeffs, &w)) / zeta.sigma(i)
        })
        .collect())
}

/// Exact Gaussian log-likelihood of the observations at `theta`.
pub fn log_likelihood(zeta: &ZetaPath, theta: &ParamVector) -> Result<f64> {
    let eps = innovations_at(zeta, theta)?;
    let n = zeta.len() as f64;
    let ss: f64 = eps.iter().map(|e| e * e).sum();
    let log_det: f64 = zeta.sigmas().iter().map(|s| 2.0 * s.ln()).sum();
    Ok(-0.5 * ss - 0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det)
}

/// Bracket `<M>_n` and the theta-free moment vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleAccumulator {
    /// `sum_i w_{i-1} w_{i-1}^T / sigma_i^2`.
    pub gram: DMatrix<f64>,
    /// `sum_i w_{i-1} l^T zeta_i / sigma_i^2`.
    pub moment: DVector<f64>,
    pub n: usize,
}

impl MartingaleAccumulator {
    pub fn new(p: usize) -> Self {
        Self {
            gram: DMatrix::zeros(p, p),
            moment: DVector::zeros(p),
            n: 0,
        }
    }

    /// Adds term `i = n + 1` of the sums.
    pub fn push(&mut self, zeta: &ZetaPath) {
        let i = self.n + 1;
        let w = DVector::from_vec(zeta.lagged_regressor(i - 1));
        let s2 = zeta.sigma(i) * zeta.sigma(i);
        self.gram.ger(1.0 / s2, &w, &w, 1.0);
        self.moment.axpy(zeta.response(i) / s2, &w, 1.0);
        self.n = i;
    }

    pub fn from_path(zeta: &ZetaPath) -> Self {
        let mut acc = Self::new(zeta.order());
        for _ in 0..zeta.len() {
            acc.push(zeta);
        }
        acc
    }
}

/// `<M>_n`, the moment vector, and the score
/// `M_n(theta) = sum_i w_{i-1} eps_i(theta) / sigma_i`.
pub fn accumulate(
    zeta: &ZetaPath,
    theta: &ParamVector,
) -> Result<(MartingaleAccumulator, DVector<f64>)> {
    let eps = innovations_at(zeta, theta)?;
    let acc = MartingaleAccumulator::from_path(zeta);
    let mut score = DVector::zeros(zeta.order());
    for i in 1..=zeta.len() {
        let w = DVector::from_vec(zeta.lagged_regressor(i - 1));
        score.axpy(eps[i - 1] / zeta.sigma(i), &w, 1.0);
    }
    Ok((acc, score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ar::simulate_ar;
    use crate::noise::sample_noise;
    use proptest::prelude::*;

    /// Dense oracle: with a zero presample `x -> xi(theta)` is unit lower
    /// triangular, so the likelihood is the Gaussian density of the residuals.
    fn dense_log_likelihood(x: &[f64], kernel: &CovarianceKernel, theta: &[f64]) -> f64 {
        let n = x.len();
        let xi: Vec<f64> = (0..n)
            .map(|m| {
                let pred: f64 = theta
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| m > *i)
                    .map(|(i, t)| t * x[m - 1 - i])
                    .sum();
                x[m] - pred
            })
            .collect();
        let t = DMatrix::from_fn(n, n, |i, j| kernel.covariance(i.abs_diff(j) as u64));
        let chol = t.cholesky().unwrap();
        let v = DVector::from_vec(xi);
        let sol = chol.solve(&v);
        let log_det: f64 = (0..n).map(|i| 2.0 * chol.l()[(i, i)].ln()).sum();
        -0.5 * v.dot(&sol) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    fn observed(theta: &[f64], kernel: &CovarianceKernel, n: usize, seed: u64) -> Vec<f64> {
        let theta = ParamVector::new(theta.to_vec()).unwrap();
        simulate_ar(&theta, &sample_noise(kernel, n, seed).unwrap())
    }

    #[test]
    fn likelihood_matches_dense_density() {
        let kernels = [
            CovarianceKernel::White,
            CovarianceKernel::ar1(0.6).unwrap(),
            CovarianceKernel::fgn(0.75).unwrap(),
        ];
        for kernel in kernels {
            for theta in [vec![0.4], vec![0.5, -0.3], vec![0.2, 0.1, -0.2]] {
                let x = observed(&theta, &kernel, 80, 5);
                let path = build_zeta(&x, &kernel, theta.len()).unwrap();
                for probe in [theta.clone(), vec![0.0; theta.len()]] {
                    let got = log_likelihood(&path, &ParamVector::new(probe.clone()).unwrap())
                        .unwrap();
                    let want = dense_log_likelihood(&x, &kernel, &probe);
                    assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "{kernel} {probe:?}");
                }
            }
        }
    }

    #[test]
    fn state_recursion_holds() {
        let kernel = CovarianceKernel::fgn(0.7).unwrap();
        let theta = ParamVector::new(vec![0.5, -0.2]).unwrap();
        let x = observed(theta.as_slice(), &kernel, 120, 9);
        let path = build_zeta(&x, &kernel, 2).unwrap();
        let eps = innovations_at(&path, &theta).unwrap();
        let prev_first = DVector::from_column_slice(path.zeta(1));
        let mut expected_first = DVector::zeros(4);
        expected_first[0] = path.sigma(1) * eps[0];
        assert!((prev_first - expected_first).norm() < 1e-12);
        for m in 2..=path.len() {
            let prev = DVector::from_column_slice(path.zeta(m - 1));
            let mut want = transition(&theta, path.beta(m - 1)) * prev;
            want[0] += path.sigma(m) * eps[m - 1];
            let got = DVector::from_column_slice(path.zeta(m));
            assert!((got - want).norm() < 1e-10, "step {m}");
        }
    }

    #[test]
    fn white_noise_reduces_to_lagged_observations() {
        let x = observed(&[0.3, 0.2], &CovarianceKernel::White, 50, 1);
        let path = build_zeta(&x, &CovarianceKernel::White, 2).unwrap();
        for m in 1..=50 {
            let z = path.zeta(m);
            assert_eq!(z[0], x[m - 1]);
            assert_eq!(z[1], if m > 1 { x[m - 2] } else { 0.0 });
            assert_eq!(&z[2..], &[0.0, 0.0]);
            assert_eq!(path.sigma(m), 1.0);
        }
    }

    #[test]
    fn markov_noise_filtered_by_one_difference() {
        let a = 0.5;
        let kernel = CovarianceKernel::ar1(a).unwrap();
        let x = [1.0, 2.0, 4.0, -1.0];
        let path = build_zeta(&x, &kernel, 1).unwrap();
        assert_eq!(path.zeta(1), &[1.0, 0.0]);
        assert!((path.zeta(2)[0] - (2.0 - a * 1.0)).abs() < 1e-15);
        // zeta^(2)_2 = beta_1 Z_1 = a
        assert!((path.zeta(2)[1] - a).abs() < 1e-15);
        assert!((path.zeta(4)[0] - (-1.0 - a * 4.0)).abs() < 1e-15);
        assert!((path.sigma(3) - (1.0 - a * a).sqrt()).abs() < 1e-15);
        assert_eq!(path.beta(3), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let k = CovarianceKernel::White;
        assert!(matches!(build_zeta(&[1.0, 2.0], &k, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_zeta(&[1.0, 2.0], &k, 2), Err(Error::TooShort { len: 2, p: 2 })));
        assert!(matches!(build_zeta(&[1.0, f64::NAN, 0.0], &k, 1), Err(Error::NonFinite(_))));
        let path = build_zeta(&[1.0, 2.0, 3.0], &k, 1).unwrap();
        let theta = ParamVector::new(vec![0.1, 0.2]).unwrap();
        assert!(matches!(
            log_likelihood(&path, &theta),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn truncation_equals_shorter_build() {
        let kernel = CovarianceKernel::fgn(0.6).unwrap();
        let x = observed(&[0.4], &kernel, 60, 2);
        let full = build_zeta(&x, &kernel, 1).unwrap();
        let short = build_zeta(&x[..35], &kernel, 1).unwrap();
        assert_eq!(full.truncated(35), short);
    }

    #[test]
    fn csv_layout() {
        let path = build_zeta(&[1.0, 2.0, 3.0], &CovarianceKernel::White, 1).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,zeta_1,zeta_2\n1,1,0\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn score_is_gradient_of_likelihood(
            t1 in -0.6f64..0.6, t2 in -0.3f64..0.3, seed in 0u64..1000, h in 0.2f64..0.9,
        ) {
            let kernel = CovarianceKernel::fgn(h).unwrap();
            let x = observed(&[0.3, 0.1], &kernel, 60, seed);
            let path = build_zeta(&x, &kernel, 2).unwrap();
            let theta = ParamVector::new(vec![t1, t2]).unwrap();
            let (acc, score) = accumulate(&path, &theta).unwrap();
            // score = moment - gram theta
            let resid = &acc.moment - &acc.gram * theta.to_dvector() - &score;
            prop_assert!(resid.norm() < 1e-9 * (1.0 + score.norm()));
            // quadratic: logL(theta + d) - logL(theta) = d.M - d'Gd/2
            let d = [0.05, -0.02];
            let moved = theta.shifted(&d, 1.0).unwrap();
            let lhs = log_likelihood(&path, &moved).unwrap() - log_likelihood(&path, &theta).unwrap();
            let dv = DVector::from_column_slice(&d);
            let rhs = dv.dot(&score) - 0.5 * dv.dot(&(&acc.gram * &dv));
            prop_assert!((lhs - rhs).abs() < 1e-8 * (1.0 + lhs.abs()));
        }
    }
}
