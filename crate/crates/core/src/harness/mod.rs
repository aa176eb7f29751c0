//! Experiment driver: JSON configuration, the time loop with CSV/JSON output,
//! convergence studies and the randomized identity checks.

pub mod checks;
pub mod config;
pub mod eoc;
pub mod run;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::diagnostics::DiagnosticsError;
use crate::model::ModelError;

pub use checks::{run_identity_checks, CheckReport, CheckResult};
pub use config::{ExplicitSetup, InitialSpec, RunConfig, SCHEMA_VERSION};
pub use eoc::{eoc_study, EocRow, EocTable, Reference};
pub use run::{run, simulate, RunManifest, RunStatus, RunSummary, SimulationFailure};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("solver failure: {message}")]
    Solver { message: String, manifest: PathBuf },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl HarnessError {
    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    pub(crate) fn csv(path: &Path, e: csv::Error) -> Self {
        Self::io(path, e)
    }

    /// Process exit code: 2 for solver failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Solver { .. } => 2,
            _ => 1,
        }
    }
}
