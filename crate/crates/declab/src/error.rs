use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("basis mismatch: state belongs to `{got}`, operation expects `{expected}`")]
    BasisMismatch { expected: String, got: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical validation failed at t = {t}: {what} (magnitude {magnitude:.3e})")]
    ValidationFailure { t: f64, what: String, magnitude: f64 },

    #[error("integrator tolerance failure at t = {t}: {what}")]
    ToleranceFailure { t: f64, what: String },

    #[error("no slope separation detected: early/late slope ratio {ratio:.3} < 3")]
    NoKnee { ratio: f64 },

    #[error("degenerate normalization: denominator {0:.3e} too close to zero")]
    DegenerateNormalization(f64),

    #[error("linear algebra backend error: {0}")]
    Linalg(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
