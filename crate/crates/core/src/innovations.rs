//! Durbin-Levinson recursion for the whitening filter of the noise.
//!
//! Row `m` of the whitening kernel, `k(m, 1..=m)`, turns the noise prefix
//! `xi_1..xi_m` into the innovation `sigma_m eps_m = sum_i k(m, i) xi_i`.
//! `k(m, m) = 1` always, and the partial autocorrelation satisfies
//! `beta_{m-1} = -k(m, 1)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::dot_rev;
use crate::noise::{CovarianceKernel, PD_EPS};

/// Filter state at step `n`: PACF `beta_1..beta_{n-1}`, innovation
/// variances `sigma_1^2..sigma_n^2` and the current row `k(n, ·)`.
///
/// The row is held newest-first (`rev[j] = k(n, n - j)`), which lets the
/// recursion update it in place and append `k(n+1, 1) = -beta_n` at the end.
/// Entries past `support()` are exact zeros; white and Markov noise keep a
/// support of one and two, which makes every dot product over the row O(1).
/// The state also caches `r(0..=n)`.
#[derive(Debug, Clone)]
pub struct FilterState {
    kernel: CovarianceKernel,
    beta: Vec<f64>,
    sigma2: Vec<f64>,
    rev: Vec<f64>,
    support: usize,
    autocov: Vec<f64>,
}

impl FilterState {
    /// Step 1: `k(1,1) = 1`, `sigma_1^2 = 1`.
    pub fn new(kernel: CovarianceKernel) -> Self {
        let mut autocov = Vec::new();
        kernel.extend_autocovariances(&mut autocov, 2);
        Self {
            kernel,
            beta: Vec::new(),
            sigma2: vec![CovarianceKernel::R0],
            rev: vec![1.0],
            support: 1,
            autocov,
        }
    }

    pub fn kernel(&self) -> &CovarianceKernel {
        &self.kernel
    }

    /// Current step `n` (1-based).
    pub fn step(&self) -> usize {
        self.rev.len()
    }

    /// `k(n, 1..=n)`, oldest first.
    pub fn row(&self) -> Vec<f64> {
        self.rev.iter().rev().copied().collect()
    }

    /// `k(n, n), k(n, n-1), ..., k(n, 1)`.
    pub fn reversed_row(&self) -> &[f64] {
        &self.rev
    }

    /// Number of leading entries of [`reversed_row`](Self::reversed_row)
    /// that may be non-zero.
    pub fn support(&self) -> usize {
        self.support
    }

    /// `beta_1..beta_{n-1}`.
    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    /// `sigma_1^2..sigma_n^2`.
    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn current_sigma2(&self) -> f64 {
        *self.sigma2.last().expect("sigma2 is never empty")
    }

    /// `beta_n` from `sum_{i=1}^n k(n,i) r(i) = beta_n sigma_n^2`, without
    /// advancing.
    pub fn next_beta(&self) -> f64 {
        let n = self.step();
        let s = self.support;
        // sum_j rev[j] r(n - j) over j < s
        dot_rev(&self.rev[..s], &self.autocov[n + 1 - s..=n]) / self.current_sigma2()
    }

    /// Moves to step `n + 1`.
    pub fn advance(mut self) -> Result<Self> {
        let n = self.step();
        let beta = self.next_beta();
        let shrink = 1.0 - beta * beta;
        if !beta.is_finite() || shrink <= PD_EPS {
            return Err(Error::Degenerate { step: n, beta });
        }
        let sigma2 = self.current_sigma2() * shrink;
        if sigma2 <= PD_EPS {
            return Err(Error::Degenerate { step: n, beta });
        }

        // k(n+1, n+1-i) = k(n, n-i) - beta_n k(n, i) for 1 <= i <= n-1,
        // i.e. rev'[j] = rev[j] - beta rev[n-j] for 1 <= j <= n-1, with
        // rev'[0] = k(n+1, n+1) = 1 and rev'[n] = k(n+1, 1) = -beta.
        if beta != 0.0 {
            let rev = &mut self.rev;
            let (mut lo, mut hi) = (1usize, n.saturating_sub(1));
            while lo < hi {
                let (a, b) = (rev[lo], rev[hi]);
                rev[lo] = a - beta * b;
                rev[hi] = b - beta * a;
                lo += 1;
                hi -= 1;
            }
            if lo == hi {
                rev[lo] -= beta * rev[lo];
            }
            self.support = n + 1;
        }
        self.rev.push(-beta);

        self.beta.push(beta);
        self.sigma2.push(sigma2);
        self.kernel.extend_autocovariances(&mut self.autocov, n + 2);
        debug_assert_eq!(self.rev[n], -beta);
        debug_assert_eq!(self.rev[0], 1.0);
        Ok(self)
    }

    /// `(sum_i k(n,i) x_i) / sigma_n` for the prefix `x_1..x_n`.
    pub fn whiten_last(&self, prefix: &[f64]) -> f64 {
        let n = self.step();
        let s = self.support;
        dot_rev(&self.rev[..s], &prefix[n - s..n]) / self.current_sigma2().sqrt()
    }

    /// `sum_{i<n} k(n,i) x_i` for the strict past `x_1..x_{n-1}`.
    pub fn past_combination(&self, past: &[f64]) -> f64 {
        let n = self.step();
        let s = self.support;
        dot_rev(&self.rev[1..s], &past[n - s..n - 1])
    }

    /// `sum_{i=lag+1}^{n} k(n,i) x_{i-lag}`, the row applied to `x` delayed
    /// by `lag` steps with zeros before the start.
    pub fn apply_lagged(&self, x: &[f64], lag: usize) -> f64 {
        let n = self.step();
        if lag >= n {
            return 0.0;
        }
        let len = self.support.min(n - lag);
        dot_rev(&self.rev[..len], &x[n - lag - len..n - lag])
    }
}

/// Standardized innovations `eps_m` and innovation standard deviations
/// `sigma_m` of an observed noise sequence.
pub fn whiten(xi: &[f64], kernel: &CovarianceKernel) -> Result<(Vec<f64>, Vec<f64>)> {
    if xi.is_empty() {
        return Err(Error::InvalidArgument("cannot whiten an empty sequence".into()));
    }
    let mut eps = Vec::with_capacity(xi.len());
    let mut sigma = Vec::with_capacity(xi.len());
    let mut state = FilterState::new(*kernel);
    for m in 1..=xi.len() {
        if m > 1 {
            state = state.advance()?;
        }
        eps.push(state.whiten_last(&xi[..m]));
        sigma.push(state.current_sigma2().sqrt());
    }
    Ok((eps, sigma))
}

/// Full triangular whitening array; `rows[m-1]` is `k(m, 1..=m)`.
pub fn kernel_rows(kernel: &CovarianceKernel, n: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one row".into()));
    }
    let mut rows = Vec::with_capacity(n);
    let mut state = FilterState::new(*kernel);
    rows.push(state.row());
    for _ in 1..n {
        state = state.advance()?;
        rows.push(state.row());
    }
    Ok(rows)
}

/// One line of the filter diagnostic dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterDumpRow {
    pub n: usize,
    pub beta: f64,
    pub sigma2: f64,
}

/// `(n, beta_n, sigma_n^2)` for `n = 1..=horizon`.
pub fn filter_dump(kernel: &CovarianceKernel, horizon: usize) -> Result<Vec<FilterDumpRow>> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let mut out = Vec::with_capacity(horizon);
    let mut state = FilterState::new(*kernel);
    loop {
        out.push(FilterDumpRow {
            n: state.step(),
            beta: state.next_beta(),
            sigma2: state.current_sigma2(),
        });
        if state.step() == horizon {
            break;
        }
        state = state.advance()?;
    }
    Ok(out)
}

pub fn write_filter_dump<W: Write>(rows: &[FilterDumpRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "beta", "sigma2"])?;
    for r in rows {
        w.write_record([r.n.to_string(), r.beta.to_string(), r.sigma2.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NormalStream;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    /// Row `m` and `sigma_m^2` from a dense solve of the Toeplitz system:
    /// the prediction-error weights are `T^{-1} e_m / (T^{-1})_{mm}`.
    fn toeplitz_oracle(kernel: &CovarianceKernel, m: usize) -> (Vec<f64>, f64) {
        let t = DMatrix::from_fn(m, m, |i, j| kernel.covariance(i.abs_diff(j) as u64));
        let mut e = DVector::zeros(m);
        e[m - 1] = 1.0;
        let x = t.lu().solve(&e).expect("covariance is invertible");
        let last = x[m - 1];
        (x.iter().map(|v| v / last).collect(), 1.0 / last)
    }

    fn kernels() -> Vec<CovarianceKernel> {
        vec![
            CovarianceKernel::White,
            CovarianceKernel::ar1(0.5).unwrap(),
            CovarianceKernel::ar1(-0.8).unwrap(),
            CovarianceKernel::fgn(0.3).unwrap(),
            CovarianceKernel::fgn(0.8).unwrap(),
        ]
    }

    #[test]
    fn rows_match_dense_solve() {
        for kernel in kernels() {
            let rows = kernel_rows(&kernel, 40).unwrap();
            let dump = filter_dump(&kernel, 40).unwrap();
            for m in [1, 2, 3, 7, 20, 40] {
                let (want, s2) = toeplitz_oracle(&kernel, m);
                for (got, w) in rows[m - 1].iter().zip(&want) {
                    assert!((got - w).abs() < 1e-10, "{kernel} m={m}");
                }
                assert!((dump[m - 1].sigma2 - s2).abs() < 1e-10, "{kernel} m={m}");
            }
        }
    }

    #[test]
    fn white_rows_are_unit_vectors() {
        let rows = kernel_rows(&CovarianceKernel::White, 5).unwrap();
        for (m, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), m + 1);
            assert_eq!(row[m], 1.0);
            assert!(row[..m].iter().all(|&v| v == 0.0));
        }
        let dump = filter_dump(&CovarianceKernel::White, 5).unwrap();
        assert!(dump.iter().all(|r| r.beta == 0.0 && r.sigma2 == 1.0));
    }

    #[test]
    fn markov_noise_has_one_step_memory() {
        let a = 0.5;
        let kernel = CovarianceKernel::ar1(a).unwrap();
        let state = FilterState::new(kernel);
        assert!((state.next_beta() - a).abs() < 1e-15);
        let state = state.advance().unwrap();
        assert_eq!(state.row(), vec![-a, 1.0]);
        assert!((state.current_sigma2() - (1.0 - a * a)).abs() < 1e-15);
        let mut state = state;
        for _ in 0..50 {
            assert_eq!(state.next_beta(), 0.0);
            state = state.advance().unwrap();
        }
        assert_eq!(state.support(), 2);
        assert_eq!(&state.reversed_row()[..2], &[1.0, -a]);
        assert!(state.reversed_row()[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn whiten_examples() {
        let (eps, sigma) = whiten(&[1.0, 2.0, -1.0], &CovarianceKernel::White).unwrap();
        assert_eq!(eps, vec![1.0, 2.0, -1.0]);
        assert_eq!(sigma, vec![1.0; 3]);

        let a: f64 = 0.5;
        let kernel = CovarianceKernel::ar1(a).unwrap();
        let (eps, sigma) = whiten(&[1.0, 2.0, 0.5], &kernel).unwrap();
        let s = (1.0 - a * a).sqrt();
        assert!((eps[0] - 1.0).abs() < 1e-15);
        assert!((eps[1] - (2.0 - a) / s).abs() < 1e-15);
        assert!((eps[2] - (0.5 - a * 2.0) / s).abs() < 1e-15);
        assert!((sigma[2] - s).abs() < 1e-15);
        assert!(whiten(&[], &kernel).is_err());
    }

    #[test]
    fn variances_follow_pacf_product() {
        for kernel in kernels() {
            let dump = filter_dump(&kernel, 60).unwrap();
            let mut prod = 1.0;
            for w in dump.windows(2) {
                prod *= 1.0 - w[0].beta * w[0].beta;
                assert!((w[1].sigma2 - prod).abs() < 1e-12);
                assert!(w[1].sigma2 <= w[0].sigma2);
            }
        }
    }

    #[test]
    fn sampled_noise_whitens_to_uncorrelated_innovations() {
        let n = 4000;
        let kernel = CovarianceKernel::fgn(0.8).unwrap();
        let path = crate::noise::sample_noise(&kernel, n, 11).unwrap();
        let (eps, _) = whiten(&path.values, &kernel).unwrap();
        let mean = eps.iter().sum::<f64>() / n as f64;
        let var = eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64;
        let lag1 = eps.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>()
            / (n as f64 * var);
        let bound = 4.0 / (n as f64).sqrt();
        assert!(lag1.abs() < bound, "lag-1 correlation {lag1}");
        assert!((var - 1.0).abs() < 0.1);
        // and the raw fGn path is visibly correlated
        let raw = &path.values;
        let c1 = raw.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / n as f64;
        assert!(c1 > 0.3);
    }

    #[test]
    fn whiten_inverts_sampling() {
        let kernel = CovarianceKernel::ar1(-0.6).unwrap();
        let mut stream = NormalStream::new(3, 0);
        let path = crate::noise::sample_noise_from(&kernel, 300, &mut stream).unwrap();
        let mut again = NormalStream::new(3, 0);
        let (eps, _) = whiten(&path.values, &kernel).unwrap();
        for e in eps {
            assert!((e - again.next_normal()).abs() < 1e-12);
        }
    }

    #[test]
    fn dump_csv_header() {
        let rows = filter_dump(&CovarianceKernel::White, 3).unwrap();
        let mut buf = Vec::new();
        write_filter_dump(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,beta,sigma2\n1,0,1\n"));
        assert_eq!(text.lines().count(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn prediction_error_identity(h in 0.05f64..0.95, a in -0.95f64..0.95, m in 1usize..25) {
            for kernel in [CovarianceKernel::fgn(h).unwrap(), CovarianceKernel::ar1(a).unwrap()] {
                let rows = kernel_rows(&kernel, m).unwrap();
                let row = &rows[m - 1];
                // Var(sum_i k(m,i) xi_i) = k^T T k = sigma_m^2, and the combination
                // is orthogonal to every earlier xi_j.
                let t = DMatrix::from_fn(m, m, |i, j| kernel.covariance(i.abs_diff(j) as u64));
                let k = DVector::from_column_slice(row);
                let tk = &t * &k;
                let s2 = filter_dump(&kernel, m).unwrap()[m - 1].sigma2;
                prop_assert!((k.dot(&tk) - s2).abs() < 1e-9);
                for j in 0..m - 1 {
                    prop_assert!(tk[j].abs() < 1e-9);
                }
                prop_assert_eq!(row[m - 1], 1.0);
                prop_assert!(s2 > 0.0 && s2 <= 1.0);
            }
        }
    }
}
