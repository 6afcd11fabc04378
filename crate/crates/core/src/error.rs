use thiserror::Error;

/// Errors raised by the market model and its inputs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A market instance or scenario field violates a model assumption.
    #[error("validation error: {path}: {rule}")]
    Validation { path: String, rule: String },

    /// A bid set was refused at mechanism intake.
    #[error("rejected bid: {path}: {rule}")]
    RejectedBid { path: String, rule: String },

    /// The scenario document is not well-formed.
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(path: impl Into<String>, rule: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            rule: rule.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
