//! Reproducibility record written after all outputs of a run.

use pinlab_core::renewal::InterArrivalLaw;
use serde::{Deserialize, Serialize};

use crate::config::{Command, ExperimentConfig};
use crate::output::FileDigest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSeed {
    pub stage: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub norm_constant: f64,
    /// Mass beyond the summation horizon, from the tail integral.
    pub tail_mass: f64,
    /// Error bound on `tail_mass` from freezing the tail at the horizon.
    pub tail_error_bound: f64,
    /// Mass of jumps longer than the cached sizes.
    pub uncached_mass: f64,
}

impl Normalization {
    pub fn of(law: &InterArrivalLaw) -> Self {
        let cached: f64 = law.masses().iter().sum();
        Self {
            norm_constant: law.norm_constant(),
            tail_mass: law.tail_mass(),
            tail_error_bound: law.tail_mass() * (1.0 + law.alpha()) / law.horizon() as f64,
            uncached_mass: (1.0 - cached).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingEvent {
    pub n: usize,
    pub route: String,
    /// Why the circulant route was abandoned, when it was.
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    /// The config after command-line overrides.
    pub config: ExperimentConfig,
    pub started_at: String,
    pub finished_at: String,
    pub workers: usize,
    pub approximate: bool,
    pub stages: Vec<StageSeed>,
    pub normalization: Normalization,
    pub sampling: Vec<SamplingEvent>,
    pub warnings: Vec<String>,
    pub outputs: Vec<FileDigest>,
}
