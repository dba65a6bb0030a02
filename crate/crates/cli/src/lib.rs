//! Config-driven runs of the pinlab estimators and checks, with CSV/JSON
//! outputs and a reproducibility manifest.

pub mod config;
pub mod manifest;
pub mod output;
mod runner;

use std::io;
use std::path::PathBuf;

use pinlab_core::disorder::DisorderError;
use pinlab_core::estimators::EstimatorError;
use pinlab_core::verify::CheckError;
use thiserror::Error;

pub use config::{Command, ExperimentConfig, Overrides};
pub use manifest::RunManifest;
pub use runner::{run, RunOutcome};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "PINLAB_WORKERS";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("malformed config: {0}")]
    Config(String),
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Estimator(EstimatorError),
    #[error(transparent)]
    Check(CheckError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

fn validation(field: &str, message: impl ToString) -> RunError {
    RunError::Validation { field: field.into(), message: message.to_string() }
}

impl From<DisorderError> for RunError {
    fn from(e: DisorderError) -> Self {
        validation("spec", e)
    }
}

/// Precondition failures are reported against the config field that set
/// them; everything else passes through.
impl From<EstimatorError> for RunError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::TooFewReplicas { .. } => validation("replicas", e),
            EstimatorError::StencilOutOfRange { .. } => validation("h", e),
            EstimatorError::InvalidGrid(_) | EstimatorError::NotBracketed(_) => validation("h_grid", e),
            EstimatorError::Order(_) => validation("order", e),
            EstimatorError::Disorder(d) => d.into(),
            EstimatorError::Renewal(_) => validation("law", e),
            other => RunError::Estimator(other),
        }
    }
}

impl From<CheckError> for RunError {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::Estimator(inner) => inner.into(),
            CheckError::Disorder(d) => d.into(),
            CheckError::InvalidParameters(_) => validation("params", e),
            other => RunError::Check(other),
        }
    }
}

/// Parses the worker count from the environment value, if set.
pub fn workers_from_env(value: Option<&str>) -> Result<Option<usize>, RunError> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(validation(WORKERS_ENV, format!("expected a positive integer, got `{v}`"))),
        },
    }
}
