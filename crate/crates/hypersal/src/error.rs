use std::io;
use std::path::{Path, PathBuf};

/// Errors surfaced by file IO, configuration and the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: no such file", path.display())]
    Missing { path: PathBuf },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}: {message}", path.display())]
    Format {
        path: PathBuf,
        kind: &'static str,
        message: String,
    },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] hypersal_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::NotFound {
            Error::Missing { path: path.to_path_buf() }
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    pub(crate) fn format(path: &Path, kind: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            kind,
            message: message.into(),
        }
    }

    /// Stable machine-readable identifier.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Missing { .. } => "input-missing",
            Error::Io { .. } => "io",
            Error::Format { kind, .. } => kind,
            Error::Config(_) => "config",
            Error::Core(e) => e.kind(),
        }
    }

    /// Process exit code: 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 1,
            _ => 2,
        }
    }

    /// `{"error":{"kind":…,"message":…}}`
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}
