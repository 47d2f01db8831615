//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A Cholesky factorization hit a non-positive pivot: the restricted
    /// operator is singular or indefinite.
    #[error("singular operator: {0}")]
    SingularOperator(String),

    /// A dense factorization/inversion was requested for an interior larger
    /// than the configured cap.
    #[error("dense cap exceeded: interior size {size} > cap {cap}")]
    DenseCapExceeded { size: usize, cap: usize },

    /// The restricted operator produced a non-positive eigenvalue, which
    /// signals a discretization bug.
    #[error("non-positive spectrum: eigenvalue {0}")]
    NonPositiveSpectrum(f64),

    /// Training produced a non-finite loss.
    #[error("training diverged with non-finite loss at epoch {epoch}")]
    DivergedTraining { epoch: usize },

    /// Relative L2 error is undefined against a zero reference.
    #[error("zero reference vector in relative L2")]
    ZeroReference,

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
