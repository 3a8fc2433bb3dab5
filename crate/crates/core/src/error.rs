use thiserror::Error;

/// Errors produced by the decomposition, compilation and simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("routing error: {0}")]
    Routing(String),

    #[error("unphysical covariance matrix (minimum eigenvalue of Γ + iΩ is {min_eigenvalue:.3e})")]
    Unphysical { min_eigenvalue: f64 },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
