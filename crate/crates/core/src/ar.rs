//! AR(p) parameters: companion form, stationarity and Fisher information.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetrize, to_rows};
use crate::noise::NoisePath;
use crate::roots::monic_roots;

/// Roots must lie strictly inside the circle of radius `1 - STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// AR coefficients `theta_1..theta_p`, with `theta_1` on the most recent lag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidArgument("AR order must be at least 1".into()));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("AR coefficients must be finite".into()));
        }
        Ok(Self(theta))
    }

    pub fn zeros(p: usize) -> Result<Self> {
        Self::new(vec![0.0; p])
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    /// `self + scale * shift`.
    pub fn shifted(&self, shift: &[f64], scale: f64) -> Result<Self> {
        if shift.len() != self.order() {
            return Err(Error::DimensionMismatch {
                expected: self.order(),
                got: shift.len(),
            });
        }
        Self::new(self.0.iter().zip(shift).map(|(t, s)| t + scale * s).collect())
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(p: ParamVector) -> Self {
        p.0
    }
}

/// Comma-separated reals, e.g. `0.5,-0.3`.
impl FromStr for ParamVector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("bad coefficient `{}`", t.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

impl fmt::Display for ParamVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(f64::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Companion matrix: first row `theta`, ones on the subdiagonal.
pub fn companion(theta: &ParamVector) -> DMatrix<f64> {
    let p = theta.order();
    let mut a = DMatrix::zeros(p, p);
    for (j, t) in theta.as_slice().iter().enumerate() {
        a[(0, j)] = *t;
    }
    for i in 1..p {
        a[(i, i - 1)] = 1.0;
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// Moduli of the roots of `z^p - theta_1 z^{p-1} - ... - theta_p`,
    /// largest first.
    pub root_moduli: Vec<f64>,
}

impl StabilityReport {
    pub fn spectral_radius(&self) -> f64 {
        self.root_moduli.first().copied().unwrap_or(0.0)
    }
}

pub fn stability(theta: &ParamVector) -> Result<StabilityReport> {
    let coeffs: Vec<f64> = theta.as_slice().iter().map(|t| -t).collect();
    let roots = monic_roots(&coeffs)?;
    let mut root_moduli: Vec<f64> = roots.iter().map(|z| z.norm()).collect();
    root_moduli.sort_by(|a, b| b.total_cmp(a));
    let stable = root_moduli[0] < 1.0 - STABILITY_MARGIN;
    Ok(StabilityReport {
        stable,
        root_moduli,
    })
}

pub fn is_stable(theta: &ParamVector) -> Result<bool> {
    Ok(stability(theta)?.stable)
}

/// [`Error::Unstable`] unless every companion eigenvalue lies inside the unit circle.
pub fn require_stable(theta: &ParamVector) -> Result<()> {
    let report = stability(theta)?;
    if report.stable {
        Ok(())
    } else {
        Err(Error::Unstable {
            spectral_radius: report.spectral_radius(),
        })
    }
}

/// Symmetric positive-definite information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherInfo {
    matrix: DMatrix<f64>,
}

impl FisherInfo {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        to_rows(&self.matrix)
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let chol = self
            .matrix
            .clone()
            .cholesky()
            .ok_or(Error::SingularGram { cond: f64::INFINITY })?;
        let mut inv = chol.inverse();
        symmetrize(&mut inv);
        Ok(inv)
    }
}

/// Solves `I = A_0^T I A_0 + b b^T` with `b = e_1`.
///
/// This is the orientation of the Lyapunov equation as stated for the Fisher
/// matrix. For `p = 1` it coincides with [`stationary_information`]; for
/// `p >= 2` the two generally differ.
pub fn fisher_info(theta: &ParamVector) -> Result<FisherInfo> {
    require_stable(theta)?;
    let a = companion(theta);
    let at = a.transpose();
    solve_lyapunov(&at.kronecker(&at))
}

pub fn fisher_info_inverse(theta: &ParamVector) -> Result<DMatrix<f64>> {
    fisher_info(theta)?.inverse()
}

/// Solves `G = A_0 G A_0^T + b b^T`: the stationary covariance of the lag
/// vector of a unit-innovation AR(p) process. This is the probability limit
/// of `<M>_n / n` and the inverse asymptotic covariance of the MLE.
pub fn stationary_information(theta: &ParamVector) -> Result<FisherInfo> {
    require_stable(theta)?;
    let a = companion(theta);
    solve_lyapunov(&a.kronecker(&a))
}

/// `(Id - K) vec(X) = vec(e_1 e_1^T)` with column-major `vec`.
fn solve_lyapunov(kron: &DMatrix<f64>) -> Result<FisherInfo> {
    let q = kron.nrows();
    let p = (q as f64).sqrt().round() as usize;
    let system = DMatrix::<f64>::identity(q, q) - kron;
    let mut rhs = DVector::<f64>::zeros(q);
    rhs[0] = 1.0;
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::Unstable { spectral_radius: 1.0 })?;
    let mut matrix = DMatrix::from_column_slice(p, p, solution.as_slice());
    symmetrize(&mut matrix);
    Ok(FisherInfo { matrix })
}

/// `X_m = sum_i theta_i X_{m-i} + xi_m` with `X_k = 0` for `k <= 0`.
pub fn simulate_ar(theta: &ParamVector, noise: &NoisePath) -> Vec<f64> {
    simulate_ar_from(theta, &noise.values)
}

pub fn simulate_ar_from(theta: &ParamVector, xi: &[f64]) -> Vec<f64> {
    let coeffs = theta.as_slice();
    let mut x: Vec<f64> = Vec::with_capacity(xi.len());
    for (m, e) in xi.iter().enumerate() {
        let mut v = *e;
        for (i, t) in coeffs.iter().enumerate() {
            if m > i {
                v += t * x[m - 1 - i];
            }
        }
        x.push(v);
    }
    x
}
