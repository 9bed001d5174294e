use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian (max |M - M^dag| entry = {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("matrix has eigenvalue {value:.3e} below -{tol:.1e}")]
    NegativeEigenvalue { value: f64, tol: f64 },

    #[error("not a valid state: {0}")]
    InvalidState(String),

    #[error("not a valid observable: {0}")]
    InvalidObservable(String),

    #[error("not a CPTP map: {0}")]
    NotCptp(crate::channels::CptpReport),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("estimator needs at least one round")]
    NoData,

    #[error("post-selection never succeeds: {0}")]
    ZeroAcceptance(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
