use thiserror::Error;

/// Errors raised by the numerical layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singular evaluation at y={y}: |W|={w_abs} or y at/below breakdown threshold")]
    SingularEvaluation { y: f64, w_abs: f64 },

    #[error("sonic denominator 1-(Wy)^2 vanished at y={y}")]
    SonicSingular { y: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("bad step: {0}")]
    BadStep(String),

    #[error("y={y} outside of range [{lo}, {hi}]")]
    OutOfRange { y: f64, lo: f64, hi: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("tail window holds {found} samples, need at least {needed}")]
    InsufficientTail { found: usize, needed: usize },

    #[error("time step underflow: dt={dt}")]
    CflViolation { dt: f64 },

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("integration stopped early at y={y}: {reason}")]
    Integration { y: f64, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
