//! Simultaneous polynomial root finding (Aberth-Ehrlich).

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const TOLERANCE: f64 = 1e-12;

/// All complex roots of the monic polynomial
/// `z^d + coeffs[0] z^{d-1} + ... + coeffs[d-1]`.
///
/// Trailing zero coefficients are deflated as exact zero roots. Each
/// approximation stops moving once its Aberth correction drops below
/// `TOLERANCE` (relative to its modulus) or its residual is within the
/// rounding bound of Horner evaluation.
pub fn monic_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("non-finite polynomial coefficient".into()));
    }
    let mut zeros = 0;
    let mut active = coeffs;
    while let Some((&last, rest)) = active.split_last() {
        if last != 0.0 {
            break;
        }
        zeros += 1;
        active = rest;
    }
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    let d = active.len();
    if d == 0 {
        return Ok(roots);
    }
    if d == 1 {
        roots.push(Complex64::new(-active[0], 0.0));
        return Ok(roots);
    }

    // full coefficient list, leading 1 first
    let mut poly = Vec::with_capacity(d + 1);
    poly.push(1.0);
    poly.extend_from_slice(active);
    let abs_poly: Vec<f64> = poly.iter().map(|c| c.abs()).collect();

    // Start on a circle inside the Cauchy bound, rotated off the real axis.
    let radius = 1.0 + active.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let start_radius = radius.min(
        // geometric mean of root moduli is |a_d|^{1/d}
        active[d - 1].abs().powf(1.0 / d as f64).max(0.5),
    );
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / d as f64 + 0.4;
            Complex64::from_polar(start_radius, angle)
        })
        .collect();
    let mut done = vec![false; d];

    for _ in 0..MAX_ITERATIONS {
        for i in 0..d {
            if done[i] {
                continue;
            }
            let (p, dp, bound) = horner(&poly, &abs_poly, z[i]);
            if p.norm() <= 4.0 * f64::EPSILON * bound {
                done[i] = true;
                continue;
            }
            let newton = p / dp;
            let repulsion: Complex64 = (0..d)
                .filter(|&j| j != i)
                .map(|j| {
                    let diff = z[i] - z[j];
                    if diff.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        diff.inv()
                    }
                })
                .sum();
            let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
            let step = if denom.norm() == 0.0 || !denom.is_finite() {
                newton
            } else {
                newton / denom
            };
            if !step.is_finite() {
                return Err(Error::RootSolverNoConverge {
                    iterations: MAX_ITERATIONS,
                });
            }
            z[i] -= step;
            if step.norm() <= TOLERANCE * z[i].norm().max(1.0) {
                done[i] = true;
            }
        }
        if done.iter().all(|&d| d) {
            roots.extend(z);
            return Ok(roots);
        }
    }
    Err(Error::RootSolverNoConverge {
        iterations: MAX_ITERATIONS,
    })
}

/// Value, derivative and the running-error bound `sum |a_k| |z|^k`.
fn horner(poly: &[f64], abs_poly: &[f64], z: Complex64) -> (Complex64, Complex64, f64) {
    let mut p = Complex64::new(poly[0], 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    let mut bound = abs_poly[0];
    let r = z.norm();
    for (c, a) in poly[1..].iter().zip(&abs_poly[1..]) {
        dp = dp * z + p;
        p = p * z + c;
        bound = bound * r + a;
    }
    (p, dp, bound)
}
