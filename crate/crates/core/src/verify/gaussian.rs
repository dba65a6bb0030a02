//! Block decoupling inequality `E[prod phi_i] <= prod ||phi_i||_kappa` for
//! Gaussian fields with invertible covariance.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{params_with_model, thresholds, CheckError, CheckReport, Direction};
use crate::disorder::{CovarianceSpec, DisorderSampler};
use crate::par_map;
use crate::rng::{stream_rng, Lane};
use crate::stats::RunningStats;

pub const HYPERCONTRACTIVITY_MAX_N: usize = 256;
const CHUNKS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiKind {
    /// `1{all entries of the block > 0}`
    AllPositive,
    /// `exp(block mean)`
    ExpMean,
    /// `min(1 + s^2, 4)`, `s = block sum / sqrt(len)`
    ClippedQuadratic,
}

impl PhiKind {
    pub const ALL: [PhiKind; 3] = [PhiKind::AllPositive, PhiKind::ExpMean, PhiKind::ClippedQuadratic];

    pub fn eval(self, block: &[f64]) -> f64 {
        let len = block.len() as f64;
        match self {
            PhiKind::AllPositive => {
                if block.iter().all(|&x| x > 0.0) {
                    1.0
                } else {
                    0.0
                }
            }
            PhiKind::ExpMean => (block.iter().sum::<f64>() / len).exp(),
            PhiKind::ClippedQuadratic => {
                let s = block.iter().sum::<f64>() / len.sqrt();
                (1.0 + s * s).min(4.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypercontractivityParams {
    pub n: usize,
    pub block_count: usize,
    pub replicas: usize,
    pub seed: u64,
}

/// Contiguous near-equal blocks of `0..n`.
fn blocks(n: usize, count: usize) -> Vec<(usize, usize)> {
    (0..count).map(|b| (b * n / count, (b + 1) * n / count)).collect()
}

#[derive(Clone, Default)]
struct Accum {
    // [config][phi]
    lhs: Vec<Vec<RunningStats>>,
    // [config][phi][block] of phi^kappa
    norms: Vec<Vec<Vec<RunningStats>>>,
}

impl Accum {
    fn new(configs: &[Vec<(usize, usize)>]) -> Self {
        let k = PhiKind::ALL.len();
        Self {
            lhs: configs.iter().map(|_| vec![RunningStats::default(); k]).collect(),
            norms: configs
                .iter()
                .map(|c| vec![vec![RunningStats::default(); c.len()]; k])
                .collect(),
        }
    }

    fn merge(&mut self, other: &Accum) {
        for (a, b) in self.lhs.iter_mut().flatten().zip(other.lhs.iter().flatten()) {
            *a = a.merge(b);
        }
        for (a, b) in self.norms.iter_mut().flatten().flatten().zip(other.norms.iter().flatten().flatten()) {
            *a = a.merge(b);
        }
    }
}

/// MC estimate of both sides with `kappa = 2 gamma_bar / lambda_min`, for
/// every function of the library, on the single-block and the
/// `block_count`-block partitions. Statistic: the largest
/// `LHS - RHS - MONTE_CARLO_SE * SE` (must be <= 0).
pub fn check_hypercontractivity(spec: &CovarianceSpec, p: &HypercontractivityParams) -> Result<CheckReport, CheckError> {
    if p.n == 0 || p.n > HYPERCONTRACTIVITY_MAX_N || p.block_count == 0 || p.block_count > p.n {
        return Err(CheckError::InvalidParameters("need 1 <= block_count <= n <= 256".into()));
    }
    let bounds = spec.spectral_bounds(p.n).map_err(|_| CheckError::NotInvertible(f64::NAN))?;
    if !(bounds.lambda_min > 0.0) {
        return Err(CheckError::NotInvertible(bounds.lambda_min));
    }
    let eta = bounds.eta();
    let gamma_bar = spec.gamma_bar();
    let kappa = 2.0 * eta * gamma_bar;
    if kappa < 1.0 {
        return Err(CheckError::InvalidParameters(format!("kappa = {kappa} < 1")));
    }
    let configs = vec![blocks(p.n, 1), blocks(p.n, p.block_count)];
    let sampler = DisorderSampler::new(spec, p.n)?;
    let per_chunk = p.replicas.div_ceil(CHUNKS);
    let chunks = par_map(CHUNKS, |c| {
        let mut acc = Accum::new(&configs);
        let mut omega = vec![0.0; p.n];
        let start = c * per_chunk;
        let end = ((c + 1) * per_chunk).min(p.replicas);
        for k in start..end {
            sampler.fill(&mut stream_rng(p.seed, Lane::Disorder, k as u64), &mut omega);
            for (ci, cfg) in configs.iter().enumerate() {
                for (fi, phi) in PhiKind::ALL.iter().enumerate() {
                    let mut prod = 1.0;
                    for (bi, &(lo, hi)) in cfg.iter().enumerate() {
                        let v = phi.eval(&omega[lo..hi]);
                        prod *= v;
                        acc.norms[ci][fi][bi].push(v.powf(kappa));
                    }
                    acc.lhs[ci][fi].push(prod);
                }
            }
        }
        acc
    });
    let mut total = Accum::new(&configs);
    for c in &chunks {
        total.merge(c);
    }

    let mut rows = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (ci, cfg) in configs.iter().enumerate() {
        for (fi, phi) in PhiKind::ALL.iter().enumerate() {
            let lhs = total.lhs[ci][fi];
            let mut log_rhs = 0.0;
            let mut rel_var = 0.0;
            for s in &total.norms[ci][fi] {
                log_rhs += s.mean.ln() / kappa;
                if s.mean > 0.0 {
                    rel_var += (s.std_error() / (kappa * s.mean)).powi(2);
                }
            }
            let rhs = log_rhs.exp();
            let se = lhs.std_error().hypot(rhs * rel_var.sqrt());
            let excess = lhs.mean - rhs - thresholds::MONTE_CARLO_SE * se;
            worst = worst.max(excess);
            rows.push(json!({
                "blocks": cfg.len(),
                "phi": phi,
                "lhs": lhs.mean,
                "rhs": rhs,
                "combined_std_error": se,
                "holds": excess <= 0.0,
            }));
        }
    }
    Ok(CheckReport::new(
        "hypercontractivity",
        params_with_model::<_>(None, &json!({"params": p, "spec": spec})),
        worst,
        0.0,
        Direction::AtMost,
        true,
    )
    .note(format!(
        "kappa = 2 * eta * gamma_bar = {kappa:.6} with eta = 1/lambda_min = {eta:.6} ({:?}), gamma_bar = {gamma_bar:.6}",
        bounds.method
    ))
    .rows(rows))
}
