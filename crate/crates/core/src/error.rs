use thiserror::Error;

/// Errors raised by geometry, model construction, instance handling and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("aircraft {i} and {j} start {distance:.6} NM apart, below the separation norm {d} NM")]
    InitialLoss {
        i: usize,
        j: usize,
        distance: f64,
        d: f64,
    },

    #[error("relative velocity is zero; time of minimum separation is undefined")]
    ZeroRelativeVelocity,

    #[error("invalid control bounds: {0}")]
    InvalidBounds(String),

    #[error("invalid aircraft state: {0}")]
    InvalidState(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("instance generation failed after {rounds} rejection rounds")]
    GenerationFailure { rounds: usize },

    #[error("problem is infeasible")]
    Infeasible,

    #[error("iteration limit reached")]
    IterationLimit,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
