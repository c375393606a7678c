use std::path::Path;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error in {file}: missing required column `{column}`")]
    MissingColumn { file: String, column: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("ordering error: {0}")]
    Ordering(String),

    #[error("unknown station {0}")]
    UnknownStation(u32),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("requested {requested} components but at most {attainable} are attainable")]
    RankExceeded { requested: usize, attainable: usize },

    #[error("score extraction failed to converge at component {component}")]
    NonConvergence { component: usize },

    #[error("schema mismatch: expected {expected} feature columns, got {got}")]
    SchemaMismatch { expected: usize, got: usize },

    #[error("missing prerequisite: {0}")]
    MissingPrerequisite(String),

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("report alignment error: missing cells {0}")]
    Alignment(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code for the CLI: 2 input/validation, 3 missing
    /// prerequisite, 4 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingPrerequisite(_) => 3,
            Error::SchemaMismatch { .. } | Error::NonConvergence { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
