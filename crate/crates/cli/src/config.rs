//! Experiment configuration: one TOML file per experiment, with command-line
//! overrides for the grid and seed.

use std::path::PathBuf;

use pinlab_core::disorder::CovarianceSpec;
use pinlab_core::renewal::LawConfig;
use pinlab_core::verify::SuiteProfile;
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    FreeEnergy,
    Mu,
    Derivatives,
    Centering,
    Gap,
    Clt,
    Decay,
    Verify,
    SampleDisorder,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FreeEnergy => "free-energy",
            Command::Mu => "mu",
            Command::Derivatives => "derivatives",
            Command::Centering => "centering",
            Command::Gap => "gap",
            Command::Clt => "clt",
            Command::Decay => "decay",
            Command::Verify => "verify",
            Command::SampleDisorder => "sample-disorder",
        }
    }

    /// Commands whose output is a set of check reports.
    pub fn is_check(self) -> bool {
        matches!(self, Command::Gap | Command::Clt | Command::Decay | Command::Verify)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; when present it must agree with the invoked subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub law: LawConfig,
    /// Not needed by `verify`, which runs its own fixed families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<CovarianceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Jump cutoff `t_max`; every output produced with it is labeled approximate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approximate_cutoff: Option<usize>,
    /// Highest derivative order for `derivatives` (default 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    /// Suite scale for `verify` (default quick).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<SuiteProfile>,
    /// Largest lag of the Gibbs covariance fit in `decay` (default 40).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_lag: Option<usize>,
    /// Replicas behind `mu_hat` in `gap` (default 200).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_replicas: Option<usize>,
}

/// Command-line replacements; a single value sets the scalar field, several
/// set the grid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub h: Option<Vec<f64>>,
    pub n: Option<Vec<usize>>,
    pub replicas: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn invalid(field: &str, message: impl Into<String>) -> RunError {
    RunError::Validation { field: field.into(), message: message.into() }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(h) = &o.h {
            if h.len() == 1 {
                self.h = Some(h[0]);
                self.h_grid = None;
            } else {
                self.h = None;
                self.h_grid = Some(h.clone());
            }
        }
        if let Some(n) = &o.n {
            if n.len() == 1 {
                self.n = Some(n[0]);
                self.n_list = None;
            } else {
                self.n = None;
                self.n_list = Some(n.clone());
            }
        }
        if o.replicas.is_some() {
            self.replicas = o.replicas;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.out.is_some() {
            self.output_dir = o.out.clone();
        }
    }

    pub fn seed(&self) -> Result<u64, RunError> {
        self.seed.ok_or_else(|| invalid("seed", "an explicit seed is required"))
    }

    pub fn spec(&self) -> Result<&CovarianceSpec, RunError> {
        self.spec.as_ref().ok_or_else(|| invalid("spec", "a disorder covariance block is required"))
    }

    /// `h_grid`, or the single `h`.
    pub fn h_values(&self) -> Result<Vec<f64>, RunError> {
        let hs = match (&self.h_grid, self.h) {
            (Some(_), Some(_)) => return Err(invalid("h", "give either h or h_grid, not both")),
            (Some(g), None) => g.clone(),
            (None, Some(h)) => vec![h],
            (None, None) => return Err(invalid("h", "required")),
        };
        if hs.is_empty() || hs.iter().any(|h| !h.is_finite()) {
            return Err(invalid("h_grid", "must be a non-empty list of finite values"));
        }
        Ok(hs)
    }

    pub fn single_h(&self) -> Result<f64, RunError> {
        match self.h_values()?.as_slice() {
            [h] => Ok(*h),
            _ => Err(invalid("h_grid", "this command takes a single h")),
        }
    }

    /// `n_list`, or the single `n`.
    pub fn n_values(&self) -> Result<Vec<usize>, RunError> {
        let ns = match (&self.n_list, self.n) {
            (Some(l), None) => l.clone(),
            (None, Some(n)) => vec![n],
            (Some(_), Some(_)) => return Err(invalid("n", "give either n or n_list, not both")),
            (None, None) => return Err(invalid("n", "required")),
        };
        if ns.is_empty() || ns.contains(&0) {
            return Err(invalid("n_list", "sizes must be positive"));
        }
        if let Some(&big) = ns.iter().find(|&&n| n > self.law.n_max) {
            return Err(invalid("n", format!("size {big} exceeds law.n_max = {}", self.law.n_max)));
        }
        Ok(ns)
    }

    pub fn single_n(&self) -> Result<usize, RunError> {
        match self.n_values()?.as_slice() {
            [n] => Ok(*n),
            _ => Err(invalid("n_list", "this command takes a single n")),
        }
    }

    pub fn replicas(&self) -> Result<usize, RunError> {
        match self.replicas {
            Some(r) if r >= 1 => Ok(r),
            Some(_) => Err(invalid("replicas", "must be at least 1")),
            None => Err(invalid("replicas", "required")),
        }
    }

    pub fn paths(&self) -> Result<usize, RunError> {
        match self.paths {
            Some(p) if p >= 1 => Ok(p),
            Some(_) => Err(invalid("paths", "must be at least 1")),
            None => Err(invalid("paths", "required")),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("pinlab-out"))
    }

    /// Checks that the config names the subcommand it is run with, if any.
    pub fn check_command(&self, invoked: Command) -> Result<(), RunError> {
        match self.command {
            Some(c) if c != invoked => Err(invalid(
                "command",
                format!("config is for `{}` but `{}` was invoked", c.name(), invoked.name()),
            )),
            _ => Ok(()),
        }
    }
}
