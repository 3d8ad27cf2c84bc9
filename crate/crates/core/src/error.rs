use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("unknown system {0:?}")]
    UnknownSystem(String),

    #[error("system name collision: {0:?}")]
    NameCollision(String),

    #[error("overlapping subsystem sets: {0}")]
    Overlap(String),

    #[error("hermiticity violation: max deviation {0:e}")]
    HermiticityViolation(f64),

    #[error("positivity violation: min eigenvalue {0:e}")]
    PositivityViolation(f64),

    #[error("trace violation: trace {0}")]
    TraceViolation(f64),

    #[error("not an isometry: max deviation {0:e}")]
    NotIsometry(f64),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("numerical integrity failure: {0}")]
    NumericalIntegrity(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("not a free operation: {0}")]
    NotFree(String),

    #[error("problem exceeds the memory cap: {0}")]
    MemoryCap(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
