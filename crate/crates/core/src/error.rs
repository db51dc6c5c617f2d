use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("modality index {index} out of range (pi = {pi})")]
    IndexOutOfRange { index: usize, pi: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step budget of {0} exhausted")]
    StepBudget(u64),

    #[error("time budget of {0} ms exhausted")]
    TimeBudget(u64),

    #[error("partial window range [{a}, {b}] invalid for window of length {n}")]
    SliceRange { a: usize, b: usize, n: usize },

    #[error("window shape mismatch: {0}")]
    Shape(String),

    #[error("window is not a continuation of its predecessor")]
    NotContinuation,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown world `{0}`")]
    UnknownWorld(String),

    #[error("model is not dense: no witness for R{index} edge ({from}, {to})")]
    NotDense { index: usize, from: String, to: String },

    #[error("malformed model: {0}")]
    Model(String),

    #[error("operation needs at least one model")]
    EmptyUnion,

    #[error("monomodal count bound is undefined for depth 0")]
    ZeroDepth,
}
