use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] rovpol::Error),

    #[error("{0}")]
    Usage(String),

    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("rerun outputs differ from the manifest: {0:?}")]
    Mismatch(Vec<String>),
}

impl CliError {
    /// 2 for configuration and usage, 3 for numerical failures, 4 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(rovpol::Error::Io(_)) | CliError::Output { .. } => 4,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Mismatch(_) => 3,
            _ => 2,
        }
    }
}
