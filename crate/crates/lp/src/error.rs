use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("dimension mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical instability at iteration {iteration}: {detail}")]
    NumericalInstability { iteration: usize, detail: String },

    #[error("malformed LP text at line {line}: {detail}")]
    Parse { line: usize, detail: String },
}
