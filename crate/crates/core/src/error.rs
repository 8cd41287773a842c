use thiserror::Error;

/// Errors produced by the analysis, fitting and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NphError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("operation requires both arms, but arm {missing} has no records")]
    SingleArm { missing: u8 },

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("{model} did not converge: {reason}")]
    NonConvergence { model: String, reason: String },

    #[error("malformed CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for NphError {
    fn from(e: std::io::Error) -> Self {
        NphError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, NphError>;
