use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration value violates its documented range. `key` is the
    /// config-document key (which is also the CLI flag stem).
    #[error("invalid configuration for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("cannot parse configuration: {0}")]
    Parse(String),

    #[error("no feasible contract: {0}")]
    NotFound(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("refusing to write non-finite value for `{field}` to {}", path.display())]
    NonFinite { path: PathBuf, field: String },

    #[error("sweep cell {param}={value} seed={seed}: {source}")]
    SweepCell {
        param: String,
        value: f64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("run cancelled")]
    Cancelled,
}

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (configuration or arguments).
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } | Error::Parse(_) | Error::InvalidArgument(_) => true,
            Error::SweepCell { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
