//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("derivative order {order} exceeds supported maximum {max}")]
    DerivativeOrder { order: usize, max: usize },

    #[error("matrix is not symmetric: max |A - Aᵀ| = {max_asymmetry:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { max_asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive semi-definite: eigenvalue {eigenvalue:.6e} below tolerance -{tolerance:.3e}")]
    NotPositiveSemiDefinite { eigenvalue: f64, tolerance: f64 },

    #[error(
        "Cholesky factorization failed after {retries} jitter escalations \
         (final jitter {final_jitter:.3e}); smallest eigenvalue {min_eigenvalue:.6e}"
    )]
    CholeskyFailed {
        retries: usize,
        final_jitter: f64,
        min_eigenvalue: f64,
    },

    #[error("negative radicand {value:.6e} beyond tolerance in RMS evaluation")]
    NegativeRadicand { value: f64 },

    #[error("slice bracket failed to shrink after {0} iterations")]
    BracketShrinkExceeded(usize),

    #[error("empty chain: no kept samples")]
    EmptyChain,

    #[error("csv file `{path}` is empty")]
    EmptyCsv { path: String },

    #[error("missing column `{column}` in `{path}`")]
    MissingColumn { column: String, path: String },

    #[error("non-numeric cell `{token}` at data row {row}, column `{column}`")]
    NonNumericCell {
        row: usize,
        column: String,
        token: String,
    },

    #[error("column `{column}` has zero variance; cannot standardize")]
    ZeroVariance { column: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
