//! Exact maximum-likelihood estimation, local asymptotic normality diagnostics
//! and likelihood-ratio testing for AR(p) processes driven by stationary
//! Gaussian noise with known covariance.
//!
//! The pipeline is:
//!
//! 1. [`noise`]: covariance families of the nuisance process and exact sampling.
//! 2. [`innovations`]: Durbin-Levinson whitening filter of the noise.
//! 3. [`state`]: the filtered process on which the likelihood factorises.
//! 4. [`inference`]: closed-form MLE, LR test, LAN terms, confidence regions.
//! 5. [`experiments`]: seeded Monte Carlo checks of the asymptotic behaviour.
//!
//! Observations are indexed from 1 and the process starts from rest:
//! `X_k = 0` for `k <= 0`, so `X_1 = xi_1`.

pub mod ar;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod innovations;
pub mod io;
pub mod linalg;
pub mod noise;
pub mod rng;
pub mod roots;
pub mod state;

pub use ar::{companion, fisher_info, fisher_info_inverse, is_stable, stability, ParamVector};
pub use error::{Error, Result};
pub use inference::{lr_statistic, lr_test, mle, EstimationResult, TestResult};
pub use noise::{sample_noise, validate_kernel, CovarianceKernel, NoisePath};
pub use state::{build_zeta, log_likelihood, ZetaPath};
