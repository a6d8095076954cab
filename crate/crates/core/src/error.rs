use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("value out of domain in {op}: {value}")]
    Domain { op: &'static str, value: f64 },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backward called on an empty tape")]
    EmptyTape,

    #[error("backward requires a scalar output, got shape {0:?}")]
    NonScalarOutput(Vec<usize>),

    #[error("zero-norm latent cannot be power normalized")]
    ZeroNorm,

    #[error("deep fade: |h| = {0:e} below equalization guard")]
    DeepFade(f64),

    #[error("decode failure: {0}")]
    DecodeFailure(String),

    #[error("LDPC construction failed after {0} attempts")]
    LdpcConstruction(usize),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training diverged at step {step}: {what}")]
    Diverged { step: usize, what: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
