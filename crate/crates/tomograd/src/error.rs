use thiserror::Error;

/// Errors produced by geometry validation, filter construction, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible scan/grid geometry (detector coverage, angle range, ...).
    #[error("geometry error: {0}")]
    Geometry(String),
    /// Array or filter dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A scalar argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A value container received non-finite data.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    /// An iterative solver produced a non-finite objective.
    #[error("solver diverged: {0}")]
    Divergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
