use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Prefixes the message with the pipeline stage that failed, keeping the
    /// error kind (and therefore the exit code).
    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            Error::Param(m) => Error::Param(format!("{stage}: {m}")),
            Error::Capacity(m) => Error::Capacity(format!("{stage}: {m}")),
            Error::Parse { path, line, msg } => Error::Parse {
                path,
                line,
                msg: format!("{stage}: {msg}"),
            },
            io @ Error::Io { .. } => io,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Param(_) => 2,
            Error::Capacity(_) => 3,
            Error::Parse { .. } | Error::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
