use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where in a corpus a validation problem was found.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Location {
    pub dialog_id: Option<String>,
    pub turn: Option<usize>,
}

impl Location {
    pub fn dialog(id: &str) -> Self {
        Self {
            dialog_id: Some(id.to_string()),
            turn: None,
        }
    }

    pub fn turn(id: &str, turn: usize) -> Self {
        Self {
            dialog_id: Some(id.to_string()),
            turn: Some(turn),
        }
    }
}

impl std::fmt::Display for Location {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.dialog_id, self.turn) {
            (Some(d), Some(t)) => write!(f, "dialog {d}, turn {t}"),
            (Some(d), None) => write!(f, "dialog {d}"),
            _ => write!(f, "<corpus>"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed input: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{at}: {message}")]
    Validation { at: Location, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("span error: {0}")]
    Span(#[from] crate::spans::SpanError),

    #[error("state key {0:?} not present in the state-action map")]
    MissingStateKey(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn validation(at: Location, message: impl Into<String>) -> Self {
        Error::Validation {
            at,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than the content of the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
