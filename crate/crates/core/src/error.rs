use thiserror::Error;

use crate::riskmodel::Diagnostic;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The model file is not well-formed JSON.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A variable occurs more than once in an expression tree.
    #[error("independence violation at {path}: variable `{variable}` is used more than once")]
    IndependenceViolation { variable: String, path: String },

    /// The model is well-formed but violates one or more invariants.
    #[error("invalid model: {}", summarize(.0))]
    Validation(Vec<Diagnostic>),

    /// The requested analysis has no closed form for this expression.
    #[error("unsupported operation at {path}: {message}")]
    Unsupported { path: String, message: String },

    /// Samples without spread cannot be smoothed into a density.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

fn summarize(diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
