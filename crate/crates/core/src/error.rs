use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    /// The requested task falls outside the tractable class; `reason` names the witness.
    #[error("{task} is not supported efficiently for this query: {reason}")]
    Intractable { task: String, reason: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("index {index} is out of bounds ({total} answers)")]
    OutOfBounds { index: u128, total: u128 },

    #[error("oracle guard exceeded: more than {limit} search steps")]
    OracleGuard { limit: u64 },

    /// An intermediate tree stopped being a join tree. Always a bug or a violated precondition.
    #[error("join-tree invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn is_out_of_bounds(&self) -> bool {
        matches!(self, Error::OutOfBounds { .. })
    }
}
