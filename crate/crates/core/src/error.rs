use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("shape mismatch in {op}: left {left:?}, right {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("adjacency of subject {subject} is asymmetric at ({i}, {j}): {a} vs {b}")]
    Asymmetric {
        subject: String,
        i: usize,
        j: usize,
        a: f64,
        b: f64,
    },

    #[error("node-count mismatch in {context}: expected {expected}, found {found}")]
    NodeCount {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown neural system tag {0:?}")]
    UnknownSystem(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the command-line front end:
    /// 1 usage error, 2 data error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 1,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Shape { .. }
            | Error::Asymmetric { .. }
            | Error::NodeCount { .. }
            | Error::UnknownSystem(_) => 2,
            Error::NonFinite(_) | Error::Divergence { .. } => 3,
        }
    }
}
