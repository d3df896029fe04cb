//! Scenario files, runs, sweeps and report files for the `ks1d` binary.

pub mod config;
pub mod scenario;
pub mod sweep;

use std::path::{Path, PathBuf};

pub use config::{parse_config, ConfigError, ScenarioConfig};
pub use scenario::{run_scenario, RunSummary};
pub use sweep::{sweep, SweepIndex};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] ks1d_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
