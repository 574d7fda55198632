use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Innovation variance fell to or below the positive-definiteness floor.
    #[error("covariance is not positive definite: innovation variance at step {step} is {sigma2:e}")]
    NotPositiveDefinite { step: usize, sigma2: f64 },

    /// The Durbin-Levinson recursion hit |beta| too close to one.
    #[error("degenerate filter at step {step}: partial autocorrelation {beta}")]
    Degenerate { step: usize, beta: f64 },

    #[error("root solver did not converge within {iterations} iterations")]
    RootSolverNoConverge { iterations: usize },

    /// Parameter lies outside the stationarity region.
    #[error("parameter is not stable: spectral radius {spectral_radius}")]
    Unstable { spectral_radius: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("series of length {len} is too short for order {p}")]
    TooShort { len: usize, p: usize },

    /// The empirical information matrix is singular or too ill-conditioned to invert.
    #[error("singular Gram matrix (condition estimate {cond:e})")]
    SingularGram { cond: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error("{failed} of {total} replicates failed (more than 1%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("malformed data: {0}")]
    Format(String),
}

impl Error {
    /// True for errors caused by numerical degeneracy rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::Degenerate { .. }
                | Error::RootSolverNoConverge { .. }
                | Error::Unstable { .. }
                | Error::SingularGram { .. }
                | Error::TooManyFailures { .. }
                | Error::NonFinite(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
