use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] bsmm_core::Error),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("report failed validation: {0}")]
    Report(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for bad input or usage, 1 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(core) => match core {
                bsmm_core::Error::Invariant(_) => 1,
                _ => 2,
            },
            Error::Parameter(_) => 2,
            Error::Transport(_) | Error::Integrity(_) | Error::Report(_) => 1,
            Error::Io { .. } | Error::Json(_) | Error::Csv(_) => 1,
        }
    }
}
