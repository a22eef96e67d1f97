//! Crate-wide error type with process exit-code mapping for the CLI.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {path}: {detail}")]
    Parse { path: String, detail: String },

    #[error("invalid structure (site {site_id}): {detail}")]
    Structure { site_id: i64, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// CLI exit code: 2 for configuration/input problems, 3 for resource caps.
    #[must_use]
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ResourceCap(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
