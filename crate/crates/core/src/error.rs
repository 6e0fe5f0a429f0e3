use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// An exhaustive enumeration would visit more subsets than allowed.
    #[error("enumeration budget exceeded: {required} subsets required, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    /// More than one sparse preimage exists for the sketch. A support listed
    /// with `infinite` set admits a whole line of solutions.
    #[error("ambiguous sketch: sparse solutions on supports {supports:?} (infinite: {infinite})")]
    Ambiguous { supports: Vec<Vec<usize>>, infinite: bool },

    #[error("unique sparse solution has a non-integral entry at index {index}")]
    NonIntegral { index: usize },

    #[error("inadmissible signal model: {0}")]
    InadmissibleModel(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameters(message.into())
    }
}
