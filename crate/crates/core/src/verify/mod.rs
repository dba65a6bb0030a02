//! Falsifiable desk-scale checks. Every check is deterministic given its
//! seed, echoes its full parameter set, and reports a statistic against a
//! threshold with a declared direction.

mod centering;
mod comparison;
mod convolution;
mod decay;
mod gap;
mod gaussian;
mod quenched;
mod sandwich;
mod suite;

pub use centering::{check_centering_variance, CenteringParams};
pub use comparison::{check_comparison_lemma, ComparisonParams};
pub use convolution::{check_convolution_decay, convolution_sequences, ConvolutionParams};
pub use decay::{
    check_endpoint_decay, check_gibbs_decay, check_replica_decoupling, DecouplingParams,
    EndpointParams, GibbsParams,
};
pub use gap::{check_largest_gap, GapParams};
pub use gaussian::{check_hypercontractivity, HypercontractivityParams, PhiKind};
pub use quenched::{check_clt, check_concentration, CltParams, ConcentrationParams};
pub use sandwich::{check_mu_sandwich, SandwichParams};
pub use suite::{run_suite, SuiteProfile};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::disorder::DisorderError;
use crate::estimators::{EstimatorError, Model};
use crate::polymer::PolymerError;

/// Shared statistical thresholds. Checks reference these, never literals.
pub mod thresholds {
    /// Estimator comparisons (sandwich, Lipschitz, positivity).
    pub const ESTIMATOR_SE: f64 = 3.0;
    /// Monte Carlo inequality checks.
    pub const MONTE_CARLO_SE: f64 = 4.0;
    /// Per-lag covariance agreement of the Gaussian sampler.
    pub const FIELD_SE: f64 = 5.0;
    pub const KS_MAX: f64 = 0.05;
    pub const R_SQUARED_MIN: f64 = 0.9;
    /// Fitted decay rate vs `mu_hat`: within this factor either way.
    pub const RATE_FACTOR: f64 = 2.0;
    /// Band for `median(M_n / log n) * mu_hat`.
    pub const GAP_BAND: (f64, f64) = (0.6, 1.67);
    /// Upper-tail excess `eps` in `P(M_n / log n >= (1 + eps) / mu)`.
    pub const GAP_TAIL_EPS: f64 = 0.5;
    /// Binomial SE multiple for empirical tail frequencies.
    pub const TAIL_SE: f64 = 3.0;
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    Polymer(#[from] PolymerError),
    #[error("variance estimate {v} is not above {mult} standard errors ({se})")]
    DegenerateVariance { v: f64, se: f64, mult: f64 },
    #[error("covariance is not invertible (lambda_min = {0})")]
    NotInvertible(f64),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// pass iff `statistic <= threshold` (plus any side conditions)
    AtMost,
    /// pass iff `statistic >= threshold` (plus any side conditions)
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub params: Value,
    pub statistic: f64,
    pub threshold: f64,
    pub direction: Direction,
    pub passed: bool,
    /// Side conditions and which constants were fitted or frozen.
    pub notes: Vec<String>,
    pub rows: Vec<Value>,
}

impl CheckReport {
    fn new(
        check_name: &str,
        params: Value,
        statistic: f64,
        threshold: f64,
        direction: Direction,
        side_conditions: bool,
    ) -> Self {
        let primary = match direction {
            Direction::AtMost => statistic <= threshold,
            Direction::AtLeast => statistic >= threshold,
        };
        Self {
            check_name: check_name.into(),
            params,
            statistic,
            threshold,
            direction,
            passed: primary && side_conditions,
            notes: Vec::new(),
            rows: Vec::new(),
        }
    }

    fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    fn rows(mut self, rows: Vec<Value>) -> Self {
        self.rows = rows;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Check parameters joined with the model they were run on.
fn params_with_model<P: Serialize>(model: Option<&Model>, p: &P) -> Value {
    let mut v = serde_json::to_value(p).expect("params serialize");
    if let (Some(m), Value::Object(map)) = (model, &mut v) {
        map.insert("law".into(), serde_json::to_value(m.law.config()).expect("law serializes"));
        map.insert("spec".into(), serde_json::to_value(&m.spec).expect("spec serializes"));
        map.insert("cutoff".into(), serde_json::to_value(m.cutoff).expect("cutoff serializes"));
    }
    v
}

/// Geometric-spacing sanity check shared by the multi-size checks.
fn require_sizes(n_list: &[usize], min: usize) -> Result<(), CheckError> {
    if n_list.len() < min || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CheckError::InvalidParameters(format!(
            "need at least {min} increasing sizes, got {n_list:?}"
        )));
    }
    Ok(())
}
