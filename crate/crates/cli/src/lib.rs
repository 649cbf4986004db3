//! Declarative experiment runner for the `sparseloc` toolkit.
//!
//! A run is one JSON config (see [`config`]) executed by [`run::run_experiment`],
//! which writes tidy CSV/JSON artifacts plus a checksummed manifest.

pub mod config;
pub mod output;
pub mod run;
pub mod verify;

use std::path::PathBuf;

pub use config::{validate_config, ExperimentConfig, Kind, Violation};
pub use output::{Artifacts, RunManifest};
pub use run::{execute, run_experiment};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<Violation>),
    #[error("{site}: {error} (partial artifacts in {})", dir.display())]
    Numerical {
        site: &'static str,
        error: sparseloc::Error,
        dir: PathBuf,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } | CliError::Io(_) => 3,
        }
    }
}
