//! Disorder-averaged estimators built on exact per-replica workspaces.
//!
//! Replica `k` always uses disorder stream `k` of the given seed, whatever
//! the value of `h`, so estimates on an `h` grid share their environments.
//! Per-replica results are collected in index order and reduced
//! sequentially, which makes every estimate bit-reproducible regardless of
//! the thread count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disorder::{CovarianceSpec, DisorderError, DisorderSample, DisorderSampler};
use crate::polymer::{PolymerError, PolymerWorkspace};
use crate::renewal::{InterArrivalLaw, RenewalError};
use crate::stats::{effective_sample_size, log_mean_exp, log_mean_exp_se, mean_se, mean_var};
use crate::try_par_map;

pub const MU_MIN_REPLICAS: usize = 100;
pub const CENTERING_MIN_REPLICAS: usize = 200;
pub const DEFAULT_STENCIL: f64 = 0.05;
/// `mu_hat` flags its estimate when ESS falls below this fraction of replicas.
pub const LOW_ESS_FRACTION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Disorder(#[from] DisorderError),
    #[error(transparent)]
    Polymer(#[from] PolymerError),
    #[error(transparent)]
    Renewal(#[from] RenewalError),
    #[error("{what} needs at least {need} replicas, got {got}")]
    TooFewReplicas { what: &'static str, need: usize, got: usize },
    #[error("stencil h - 2*delta = {lowest} is below the floor {floor}")]
    StencilOutOfRange { lowest: f64, floor: f64 },
    #[error("critical point not bracketed by the grid: {0}")]
    NotBracketed(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("derivative order {0} outside 1..=3")]
    Order(usize),
}

/// One estimated quantity; the CSV row format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub name: String,
    pub h: f64,
    pub n: usize,
    pub replicas: usize,
    pub point: f64,
    pub std_error: f64,
    pub method: String,
    pub seed: u64,
}

/// Law, disorder covariance, and the optional jump cutoff.
#[derive(Debug, Clone)]
pub struct Model {
    pub law: InterArrivalLaw,
    pub spec: CovarianceSpec,
    pub cutoff: Option<usize>,
}

impl Model {
    pub fn new(law: InterArrivalLaw, spec: CovarianceSpec) -> Self {
        Self { law, spec, cutoff: None }
    }

    pub fn with_cutoff(mut self, cutoff: Option<usize>) -> Self {
        self.cutoff = cutoff;
        self
    }

    /// Method tag, with the approximation watermark when a cutoff is set.
    pub fn method(&self, base: &str) -> String {
        match self.cutoff {
            Some(t) => format!("{base}+approximate(t_max={t})"),
            None => base.to_string(),
        }
    }

    pub fn workspace(
        &self,
        omega: &DisorderSample,
        h: f64,
        r_max: usize,
    ) -> Result<PolymerWorkspace, PolymerError> {
        PolymerWorkspace::build_with_cutoff(&self.law, &omega.values, h, r_max, self.cutoff)
    }

    /// Runs `f` on replica `k = 0..replicas` with its workspace at `h`.
    pub fn map_replicas<T, F>(
        &self,
        h: f64,
        n: usize,
        replicas: usize,
        seed: u64,
        r_max: usize,
        f: F,
    ) -> Result<Vec<T>, EstimatorError>
    where
        T: Send,
        F: Fn(usize, &DisorderSample, &PolymerWorkspace) -> Result<T, EstimatorError> + Sync + Send,
    {
        let sampler = DisorderSampler::new(&self.spec, n)?;
        try_par_map(replicas, |k| {
            let omega = sampler.sample(seed, k as u64);
            let ws = self.workspace(&omega, h, r_max)?;
            f(k, &omega, &ws)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicaSummary {
    pub log_partition: f64,
    pub log_partition_minus: f64,
    pub log_endpoint_mass: f64,
    pub mean_contacts: f64,
    pub var_contacts: f64,
}

pub fn replica_summaries(
    model: &Model,
    h: f64,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<Vec<ReplicaSummary>, EstimatorError> {
    model.map_replicas(h, n, replicas, seed, 2, |_, _, ws| {
        let k = ws.contact_cumulants(2)?;
        Ok(ReplicaSummary {
            log_partition: ws.log_partition(),
            log_partition_minus: ws.log_partition_minus(),
            log_endpoint_mass: ws.log_endpoint_mass(),
            mean_contacts: k[0],
            var_contacts: k[1],
        })
    })
}

fn record(name: &str, h: f64, n: usize, replicas: usize, point: f64, se: f64, method: String, seed: u64) -> EstimateRecord {
    EstimateRecord { name: name.into(), h, n, replicas, point, std_error: se, method, seed }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeEnergyEstimate {
    pub mean: EstimateRecord,
    /// `(1/n) log Z` for replica 0 alone; its error bar is the replica SD.
    pub birkhoff: EstimateRecord,
}

fn free_energy_from(
    model: &Model,
    sums: &[ReplicaSummary],
    h: f64,
    n: usize,
    seed: u64,
) -> FreeEnergyEstimate {
    let per: Vec<f64> = sums.iter().map(|s| s.log_partition / n as f64).collect();
    let (m, v) = mean_var(&per);
    let r = per.len();
    FreeEnergyEstimate {
        mean: record("free_energy", h, n, r, m, (v / r as f64).sqrt(), model.method("replica-mean"), seed),
        birkhoff: record("free_energy", h, n, 1, per[0], v.sqrt(), model.method("single-trajectory"), seed),
    }
}

/// `f_hat = mean_k (1/n) log Z_n(omega_k)`.
pub fn free_energy(
    model: &Model,
    h: f64,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<FreeEnergyEstimate, EstimatorError> {
    if replicas < 2 {
        return Err(EstimatorError::TooFewReplicas { what: "free_energy", need: 2, got: replicas });
    }
    let sums = replica_summaries(model, h, n, replicas, seed)?;
    Ok(free_energy_from(model, &sums, h, n, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuEstimate {
    pub record: EstimateRecord,
    pub ess: f64,
    pub low_ess: bool,
}

fn mu_from(model: &Model, sums: &[ReplicaSummary], h: f64, n: usize, seed: u64) -> MuEstimate {
    let neg: Vec<f64> = sums.iter().map(|s| -s.log_partition_minus).collect();
    let point = -log_mean_exp(&neg) / n as f64;
    let se = log_mean_exp_se(&neg) / n as f64;
    let ess = effective_sample_size(&neg);
    let r = sums.len();
    MuEstimate {
        record: record("mu", h, n, r, point, se, model.method("log-mean-inverse-partition"), seed),
        ess,
        low_ess: ess < LOW_ESS_FRACTION * r as f64,
    }
}

/// `mu_hat = -(1/n) log mean_k 1/Z^-_n(omega_k)`.
pub fn mu_hat(
    model: &Model,
    h: f64,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<MuEstimate, EstimatorError> {
    if replicas < MU_MIN_REPLICAS {
        return Err(EstimatorError::TooFewReplicas { what: "mu_hat", need: MU_MIN_REPLICAS, got: replicas });
    }
    let sums = replica_summaries(model, h, n, replicas, seed)?;
    Ok(mu_from(model, &sums, h, n, seed))
}

/// Both `f_hat` and `mu_hat` from one set of replicas.
pub fn free_energy_and_mu(
    model: &Model,
    h: f64,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<(FreeEnergyEstimate, MuEstimate), EstimatorError> {
    if replicas < MU_MIN_REPLICAS {
        return Err(EstimatorError::TooFewReplicas { what: "mu_hat", need: MU_MIN_REPLICAS, got: replicas });
    }
    let sums = replica_summaries(model, h, n, replicas, seed)?;
    Ok((free_energy_from(model, &sums, h, n, seed), mu_from(model, &sums, h, n, seed)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilOptions {
    pub delta: f64,
    pub floor: f64,
}

impl Default for StencilOptions {
    fn default() -> Self {
        Self { delta: DEFAULT_STENCIL, floor: f64::NEG_INFINITY }
    }
}

/// `rho_hat` (order 1) and `v_hat` (order 2) from exact cumulants of `L_n`;
/// order 3 from a 5-point central difference of the replica-averaged
/// `(1/n) log Z` on `h +- delta, h +- 2 delta`.
pub fn free_energy_derivatives(
    model: &Model,
    h: f64,
    n: usize,
    replicas: usize,
    order: usize,
    seed: u64,
    stencil: StencilOptions,
) -> Result<Vec<EstimateRecord>, EstimatorError> {
    if !(1..=3).contains(&order) {
        return Err(EstimatorError::Order(order));
    }
    if replicas < 2 {
        return Err(EstimatorError::TooFewReplicas { what: "derivatives", need: 2, got: replicas });
    }
    let nf = n as f64;
    let sums = replica_summaries(model, h, n, replicas, seed)?;
    let mut out = Vec::new();
    let rho: Vec<f64> = sums.iter().map(|s| s.mean_contacts / nf).collect();
    let (m, se) = mean_se(&rho);
    out.push(record("rho", h, n, replicas, m, se, model.method("exact-cumulant"), seed));
    if order >= 2 {
        let v: Vec<f64> = sums.iter().map(|s| s.var_contacts / nf).collect();
        let (m, se) = mean_se(&v);
        out.push(record("v", h, n, replicas, m, se, model.method("exact-cumulant"), seed));
    }
    if order >= 3 {
        let d = stencil.delta;
        let lowest = h - 2.0 * d;
        if lowest < stencil.floor {
            return Err(EstimatorError::StencilOutOfRange { lowest, floor: stencil.floor });
        }
        let at = |x: f64| -> Result<Vec<f64>, EstimatorError> {
            model.map_replicas(x, n, replicas, seed, 0, |_, _, ws| Ok(ws.log_partition() / nf))
        };
        let (m2, m1, p1, p2) = (at(h - 2.0 * d)?, at(h - d)?, at(h + d)?, at(h + 2.0 * d)?);
        let per: Vec<f64> = (0..replicas)
            .map(|k| (p2[k] - 2.0 * p1[k] + 2.0 * m1[k] - m2[k]) / (2.0 * d.powi(3)))
            .collect();
        let (m, se) = mean_se(&per);
        out.push(record(
            "d3_free_energy",
            h,
            n,
            replicas,
            m,
            se,
            model.method(&format!("central-difference(delta={d})")),
            seed,
        ));
    }
    Ok(out)
}

/// Finite-difference `rho` from `f_hat(h +- delta)`, same replicas.
pub fn rho_finite_difference(
    model: &Model,
    h: f64,
    n: usize,
    replicas: usize,
    seed: u64,
    delta: f64,
) -> Result<EstimateRecord, EstimatorError> {
    let nf = n as f64;
    let at = |x: f64| model.map_replicas(x, n, replicas, seed, 0, |_, _, ws| Ok(ws.log_partition() / nf));
    let (lo, hi) = (at(h - delta)?, at(h + delta)?);
    let per: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) / (2.0 * delta)).collect();
    let (m, se) = mean_se(&per);
    Ok(record("rho", h, n, replicas, m, se, model.method(&format!("central-difference(delta={delta})")), seed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenteringStatistics {
    /// `mean_k E_omega[L_n] / n`
    pub rho_n: EstimateRecord,
    /// `var_k E_omega[L_n] / n`
    pub w_hat: EstimateRecord,
    /// Density in the bulk `[n/4, 3n/4]`, used as the reference `rho`.
    pub rho_bulk: EstimateRecord,
    /// `(m, |mean E[L_m] - rho_bulk m|)` for `m = n/2, n`.
    pub offsets: Vec<(usize, f64)>,
}

pub fn centering_statistics(
    model: &Model,
    h: f64,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<CenteringStatistics, EstimatorError> {
    if replicas < CENTERING_MIN_REPLICAS {
        return Err(EstimatorError::TooFewReplicas {
            what: "centering_statistics",
            need: CENTERING_MIN_REPLICAS,
            got: replicas,
        });
    }
    centering_unchecked(model, h, n, replicas, seed)
}

pub(crate) fn centering_unchecked(
    model: &Model,
    h: f64,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<CenteringStatistics, EstimatorError> {
    let half = n / 2;
    let (lo, hi) = (n / 4, 3 * n / 4);
    let per = model.map_replicas(h, n, replicas, seed, 1, |_, _, ws| {
        let bulk = (lo.max(1)..=hi).map(|i| ws.contact_marginal(i)).sum::<f64>()
            / (hi + 1 - lo.max(1)) as f64;
        Ok((ws.contact_moments(1)?[0], ws.prefix_moment(half, 1), bulk))
    })?;
    let nf = n as f64;
    let full: Vec<f64> = per.iter().map(|p| p.0).collect();
    let prefix: Vec<f64> = per.iter().map(|p| p.1).collect();
    let bulk: Vec<f64> = per.iter().map(|p| p.2).collect();
    let (mean_full, var_full) = mean_var(&full);
    let mean_prefix = mean_var(&prefix).0;
    let (rho_b, rho_b_se) = mean_se(&bulk);
    // var of the sample variance for a roughly Gaussian population
    let w = var_full / nf;
    let w_se = w * (2.0 / (replicas as f64 - 1.0)).sqrt();
    Ok(CenteringStatistics {
        rho_n: record("rho_n", h, n, replicas, mean_full / nf, (var_full / replicas as f64).sqrt() / nf, model.method("exact-first-moment"), seed),
        w_hat: record("w", h, n, replicas, w, w_se, model.method("replica-variance"), seed),
        rho_bulk: record("rho_bulk", h, n, replicas, rho_b, rho_b_se, model.method("bulk-marginals"), seed),
        offsets: vec![
            (half, (mean_prefix - rho_b * half as f64).abs()),
            (n, (mean_full - rho_b * nf).abs()),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalScan {
    pub h_c: f64,
    /// `(grid h to the left, h_c)`
    pub bracket: (f64, f64),
    pub free_energy: Vec<EstimateRecord>,
    pub mu: Vec<EstimateRecord>,
    /// `h_c <= 0` up to one grid step.
    pub annealed_bound_ok: bool,
}

/// Smallest grid `h` with both `f_hat > 3 SE` and `mu_hat > 3 SE`.
pub fn critical_point_scan(
    model: &Model,
    h_grid: &[f64],
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<CriticalScan, EstimatorError> {
    if h_grid.len() < 5 || h_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(EstimatorError::InvalidGrid("need >= 5 strictly increasing points".into()));
    }
    let mut fs = Vec::new();
    let mut mus = Vec::new();
    for &h in h_grid {
        let (f, mu) = free_energy_and_mu(model, h, n, replicas, seed)?;
        fs.push(f.mean);
        mus.push(mu.record);
    }
    let positive = |k: usize| {
        fs[k].point > 3.0 * fs[k].std_error && mus[k].point > 3.0 * mus[k].std_error
    };
    let idx = (0..h_grid.len()).find(|&k| positive(k));
    match idx {
        Some(0) => Err(EstimatorError::NotBracketed(format!(
            "already localized at the leftmost point h={}",
            h_grid[0]
        ))),
        None => Err(EstimatorError::NotBracketed("no localized grid point".into())),
        Some(k) => {
            let step = h_grid[k] - h_grid[k - 1];
            Ok(CriticalScan {
                h_c: h_grid[k],
                bracket: (h_grid[k - 1], h_grid[k]),
                free_energy: fs,
                mu: mus,
                annealed_bound_ok: h_grid[k] <= step,
            })
        }
    }
}
