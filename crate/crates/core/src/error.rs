use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {function}: {detail}")]
    Domain { function: &'static str, detail: String },

    #[error("{function} did not converge after {iterations} iterations")]
    NoConvergence { function: &'static str, iterations: usize },

    #[error("correction factor p(u={u}, alpha={alpha}) = {p} is not positive; the correction model is invalid here")]
    InvalidCorrection { u: f64, alpha: f64, p: f64 },

    #[error("gross exposure multiple C = L*lambda' = {c} must be greater than 9 for the tail approximation to apply")]
    TruncationTooTight { c: f64 },

    #[error("shifted confidence u = {u} is outside (0, 1); the single-loss approximation is inapplicable")]
    ShiftedConfidence { u: f64 },

    #[error("target mean {mu} is infeasible for gross exposure {gross_exposure}: must satisfy 0 < mu < L/2")]
    InfeasibleMean { mu: f64, gross_exposure: f64 },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("rank-deficient least-squares system ({0}); use a better conditioned basis or more distinct points")]
    RankDeficient(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(function: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            function,
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
