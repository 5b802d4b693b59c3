//! Pipeline glue behind the `fwips` binary: configuration, model persistence
//! and the `simulate` / `train` / `evaluate` / `generate-rm` steps.

use std::path::{Path, PathBuf};

pub mod config;
pub mod pipeline;

pub use config::{GenerateConfig, ModelKind, PipelineConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fwips_core::Error),

    #[error("configuration: {0}")]
    Config(String),

    #[error("invalid config file: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
