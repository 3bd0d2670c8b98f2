use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("solver instability at node {node}, step {step}: {reason}")]
    SolverInstability {
        node: usize,
        step: usize,
        reason: String,
    },

    #[error("degenerate snapshot at column {column}: {reason}")]
    DegenerateSnapshot { column: usize, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 configuration, 3 numerical divergence, 4 IO.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Argument(_) | Error::Shape(_) => 2,
            Error::Divergence(_)
            | Error::SolverInstability { .. }
            | Error::DegenerateSnapshot { .. } => 3,
            Error::Io { .. } | Error::Format(_) => 4,
            Error::Stage { .. } => unreachable!("root() strips stage wrappers"),
        }
    }
}

pub(crate) fn ensure_len(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::shape(format!(
            "{what}: expected length {expected}, got {got}"
        )));
    }
    Ok(())
}
