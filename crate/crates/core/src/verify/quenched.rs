//! Fluctuations of `L_n` under the quenched measure and of `log Z` under
//! the disorder.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{params_with_model, thresholds, CheckError, CheckReport, Direction};
use crate::estimators::Model;
use crate::stats::{ks_statistic, mean_se, mean_var, median, normal_cdf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltParams {
    pub h: f64,
    pub n: usize,
    pub omega_replicas: usize,
    pub paths_per_omega: usize,
    pub seed: u64,
}

/// Per disorder: sampled `L_n`, centered by the exact quenched mean and
/// scaled by the global `sqrt(n v_hat)`, compared with the standard normal
/// by KS distance. Passes if the median distance is at most `KS_MAX`.
pub fn check_clt(model: &Model, p: &CltParams) -> Result<CheckReport, CheckError> {
    let nf = p.n as f64;
    let per = model.map_replicas(p.h, p.n, p.omega_replicas, p.seed, 2, |k, _, ws| {
        let c = ws.contact_cumulants(2)?;
        let samples: Vec<f64> = (0..p.paths_per_omega)
            .map(|j| ws.sample_path_seeded(p.seed, (k * p.paths_per_omega + j) as u64).map(|x| x.contacts() as f64))
            .collect::<Result<_, _>>()?;
        Ok((c[0], c[1], samples))
    })?;
    let v_per: Vec<f64> = per.iter().map(|x| x.1 / nf).collect();
    let (v_hat, v_se) = mean_se(&v_per);
    if !(v_hat > thresholds::ESTIMATOR_SE * v_se) || v_hat <= 0.0 {
        return Err(CheckError::DegenerateVariance { v: v_hat, se: v_se, mult: thresholds::ESTIMATOR_SE });
    }
    let scale = (nf * v_hat).sqrt();
    let mut rows = Vec::new();
    let mut ks = Vec::new();
    let us = [1.0, 2.0, 3.0];
    let mut exceed = [0usize; 3];
    let mut total = 0usize;
    for (k, (mean, var, samples)) in per.iter().enumerate() {
        let z: Vec<f64> = samples.iter().map(|l| (l - mean) / scale).collect();
        let d = ks_statistic(&z, normal_cdf);
        ks.push(d);
        for (slot, u) in exceed.iter_mut().zip(us) {
            *slot += samples.iter().filter(|&&l| (l - mean).abs() > u * nf.sqrt()).count();
        }
        total += samples.len();
        rows.push(json!({"omega": k, "exact_mean": mean, "exact_variance_over_n": var / nf, "ks": d}));
    }
    let freqs: Vec<f64> = exceed.iter().map(|&c| c as f64 / total as f64).collect();
    let shape_ok = freqs.windows(2).all(|w| w[1] <= w[0]);
    for (u, f) in us.iter().zip(&freqs) {
        rows.push(json!({"u_over_sqrt_n": u, "tail_frequency": f}));
    }
    let med = median(&ks);
    Ok(CheckReport::new(
        "clt",
        params_with_model(Some(model), p),
        med,
        thresholds::KS_MAX,
        Direction::AtMost,
        true,
    )
    .note(format!("v_hat = {v_hat:.6} (se {v_se:.2e}) from exact cumulants"))
    .note(format!("concentration companion: tail frequencies {freqs:?} decreasing: {shape_ok} (shape only, c_omega not computable)"))
    .rows(rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationParams {
    pub h: f64,
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
}

/// Empirical `P(|log Z - mean| > u)` at `u = sigma_hat * {0, 1, 2, 3}`
/// against `2 exp(-u^2 / (4 n gamma_bar_n))`. The statistic is the largest
/// excess of a tail frequency over bound plus `TAIL_SE` binomial SEs.
pub fn check_concentration(model: &Model, p: &ConcentrationParams) -> Result<CheckReport, CheckError> {
    let log_z = model.map_replicas(p.h, p.n, p.replicas, p.seed, 0, |_, _, ws| Ok(ws.log_partition()))?;
    let (mean, var) = mean_var(&log_z);
    let sigma = var.sqrt();
    let gbar = model.spec.gamma_bar_n(p.n);
    let r = log_z.len() as f64;
    let mut worst = f64::NEG_INFINITY;
    let mut rows = Vec::new();
    for m in [0.0, 1.0, 2.0, 3.0] {
        let u = m * sigma;
        let freq = log_z.iter().filter(|&&x| (x - mean).abs() > u).count() as f64 / r;
        let se = (freq * (1.0 - freq) / r).sqrt();
        let bound = 2.0 * (-u * u / (4.0 * p.n as f64 * gbar)).exp();
        let excess = freq - bound - thresholds::TAIL_SE * se;
        worst = worst.max(excess);
        rows.push(json!({"u_over_sigma": m, "u": u, "empirical_tail": freq, "std_error": se, "bound": bound}));
    }
    Ok(CheckReport::new(
        "concentration",
        params_with_model(Some(model), p),
        worst,
        0.0,
        Direction::AtMost,
        true,
    )
    .note(format!("sigma_hat = {sigma:.6}, gamma_bar_n = {gbar:.6}"))
    .rows(rows))
}
