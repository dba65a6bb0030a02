//! Variance of the quenched centering term, and the environment covariance
//! of contact marginals.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{params_with_model, thresholds, CheckError, CheckReport, Direction};
use crate::estimators::{centering_unchecked, Model};
use crate::stats::mean_var;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteringParams {
    pub h: f64,
    /// `w_hat` is compared at `n` and `2n`.
    pub n: usize,
    pub replicas: usize,
    /// Decay rate for the covariance bound, typically from the Gibbs check.
    pub eps_hat: f64,
    pub seed: u64,
}

/// `sum_{k,l} |gamma_{|k-l|}| e^{-eps|i-k|} e^{-eps|j-l|}` over `1..=n`.
fn bound_shape(model: &Model, n: usize, i: usize, j: usize, eps: f64) -> f64 {
    let gam: Vec<f64> = (0..n).map(|k| model.spec.gamma(k).abs()).collect();
    let ei: Vec<f64> = (1..=n).map(|k| (-eps * k.abs_diff(i) as f64).exp()).collect();
    let ej: Vec<f64> = (1..=n).map(|l| (-eps * l.abs_diff(j) as f64).exp()).collect();
    let mut s = 0.0;
    for k in 0..n {
        for l in 0..n {
            s += gam[k.abs_diff(l)] * ei[k] * ej[l];
        }
    }
    s
}

/// Passes when `w_hat(n)` and `w_hat(2n)` agree within `MONTE_CARLO_SE`
/// combined SEs, `w_hat > ESTIMATOR_SE * SE` for invertible covariances,
/// and the environment covariances of contact marginals stay below the
/// bound with `C` fitted at the adjacent pair `(n/2, n/2 + 1)`.
pub fn check_centering_variance(model: &Model, p: &CenteringParams) -> Result<CheckReport, CheckError> {
    if p.n < 16 || !(p.eps_hat > 0.0) {
        return Err(CheckError::InvalidParameters("need n >= 16 and eps_hat > 0".into()));
    }
    let small = centering_unchecked(model, p.h, p.n, p.replicas, p.seed)?;
    let large = centering_unchecked(model, p.h, 2 * p.n, p.replicas, p.seed)?;
    let (w1, w2) = (&small.w_hat, &large.w_hat);
    let se = w1.std_error.hypot(w2.std_error);
    let gap = (w1.point - w2.point).abs();
    let invertible = model.spec.spectral_bounds(p.n.min(512)).map(|b| b.lambda_min > 0.0).unwrap_or(false);
    let positive = w2.point > thresholds::ESTIMATOR_SE * w2.std_error;
    let variance_ok = gap <= thresholds::MONTE_CARLO_SE * se && (!invertible || positive);

    // environment covariances of marginals at size n
    let n = p.n;
    let mid = n / 2;
    let mut pairs: Vec<(usize, usize)> = [1usize, 2, 4, 8, 16, 32]
        .iter()
        .filter(|&&d| mid + d < n)
        .map(|&d| (mid, mid + d))
        .collect();
    pairs.push((n / 4, 3 * n / 4));
    let marg = model.map_replicas(p.h, n, p.replicas, p.seed, 0, |_, _, ws| {
        Ok(pairs.iter().map(|&(i, j)| (ws.contact_marginal(i), ws.contact_marginal(j))).collect::<Vec<_>>())
    })?;
    let r = marg.len() as f64;
    let mut rows = vec![
        json!({"n": n, "w_hat": w1.point, "std_error": w1.std_error}),
        json!({"n": 2 * n, "w_hat": w2.point, "std_error": w2.std_error}),
    ];
    let mut constant = f64::NAN;
    let mut bound_ok = true;
    for (idx, &(i, j)) in pairs.iter().enumerate() {
        let a: Vec<f64> = marg.iter().map(|m| m[idx].0).collect();
        let b: Vec<f64> = marg.iter().map(|m| m[idx].1).collect();
        let ma = mean_var(&a).0;
        let mb = mean_var(&b).0;
        let prods: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).collect();
        let (cov_raw, var_prod) = mean_var(&prods);
        let cov = cov_raw * r / (r - 1.0);
        let cov_se = (var_prod / r).sqrt();
        let shape = bound_shape(model, n, i, j, p.eps_hat);
        if idx == 0 {
            constant = cov.abs() / shape;
        }
        let bound = constant * shape;
        let holds = cov.abs() <= bound + thresholds::ESTIMATOR_SE * cov_se;
        if idx > 0 {
            bound_ok &= holds;
        }
        rows.push(json!({"i": i, "j": j, "env_covariance": cov, "std_error": cov_se, "bound": bound, "z": cov / cov_se, "holds": holds}));
    }
    Ok(CheckReport::new(
        "centering_variance",
        params_with_model(Some(model), p),
        gap,
        thresholds::MONTE_CARLO_SE * se,
        Direction::AtMost,
        (!invertible || positive) && bound_ok,
    )
    .note(format!("w_hat agreement: {variance_ok}; positive: {positive}; invertible covariance: {invertible}"))
    .note(format!("covariance bound constant C = {constant:.6e} fitted at ({mid}, {}) and frozen; eps = {}", mid + 1, p.eps_hat))
    .rows(rows))
}
