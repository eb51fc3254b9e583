use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("insufficient {class} items ({available} < {required})")]
    Insufficient {
        class: &'static str,
        available: usize,
        required: usize,
    },

    #[error("unknown tag `{0}`")]
    UnknownTag(String),

    #[error("unknown track `{0}`")]
    UnknownTrack(String),

    #[error("statistic is undefined: {0}")]
    Undefined(String),

    #[error("unsupported sample rate {0} Hz")]
    UnsupportedRate(u32),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite activation in {0}")]
    NonFinite(String),

    #[error("bad file format in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("missing annotation cells: {0}")]
    MissingCells(String),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
