use thiserror::Error;

/// Errors raised anywhere in the link simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("quadratic program is infeasible")]
    Infeasible,

    #[error(
        "QP solver stopped after {iterations} iterations \
         (stationarity {stationarity:e}, primal {primal:e}, dual {dual:e})"
    )]
    NotConverged {
        iterations: usize,
        stationarity: f64,
        primal: f64,
        dual: f64,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("adaptive equalizer diverged after {0} updates")]
    Diverged(usize),

    #[error("phase trellis posterior vanished at symbol {0}")]
    PosteriorVanished(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
