use thiserror::Error;

/// Errors produced by the compression pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty index set: {0}")]
    EmptyIndexSet(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("matrix structure error: {0}")]
    Structure(String),

    /// An internal consistency check failed. This indicates a bug in the
    /// refinement or reduction code, never a bad user input.
    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-parsable category, used for the CLI's
    /// `error:<category>:` stderr prefix and exit-code mapping.
    pub fn category(&self) -> &'static str {
        match self {
            Error::EmptyIndexSet(_) | Error::Parse { .. } => "parse",
            Error::Dimension { .. }
            | Error::Parameter(_)
            | Error::Structure(_)
            | Error::SizeLimit(_)
            | Error::Schema(_)
            | Error::Evaluation(_) => "flags",
            Error::Invariant(_) => "internal",
            Error::Io(_) | Error::Json(_) => "io",
        }
    }

    pub(crate) fn dimension(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected,
            actual,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
