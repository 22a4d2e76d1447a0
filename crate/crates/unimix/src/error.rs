use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("{path}:{line}: record is not valid UTF-8")]
    InvalidUtf8 { path: PathBuf, line: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("sampling an empty language: {0}")]
    EmptyLanguage(String),

    #[error("plan/shard mismatch: {0}")]
    Mismatch(String),

    #[error("resume state does not match the current configuration: {0}")]
    ResumeMismatch(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code contract: 1 for validation errors, 2 for runtime
    /// and I/O errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::EmptyCorpus
            | Error::EmptyLanguage(_)
            | Error::Mismatch(_)
            | Error::ResumeMismatch(_) => 1,
            Error::Io { .. } | Error::Parse { .. } | Error::InvalidUtf8 { .. } => 2,
        }
    }
}
