use std::io;
use std::path::PathBuf;

use crossview_core::Error as ModelError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("{path}:{line}: {key}: {msg}")]
    Config {
        path: PathBuf,
        line: usize,
        key: String,
        msg: String,
    },
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: ModelError,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// 2 for numerical blow-ups during training, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        let model = match self {
            CliError::Model(e) | CliError::Fold { source: e, .. } => e,
            _ => return 1,
        };
        match model {
            ModelError::Divergence { .. } | ModelError::NonFinite { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
