//! Largest gap between contacts against the `log n / mu` scale.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{params_with_model, require_sizes, thresholds, CheckError, CheckReport, Direction};
use crate::estimators::{mu_hat, Model, MU_MIN_REPLICAS};
use crate::stats::median;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapParams {
    pub h: f64,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub paths: usize,
    /// Replicas for `mu_hat`, computed at the largest size.
    pub mu_replicas: usize,
    pub seed: u64,
}

/// Per size: all `M_n / log n` over `(omega, path)`, their median and the
/// frequency of `M_n / log n >= (1 + eps) / mu_hat`.
pub fn check_largest_gap(model: &Model, p: &GapParams) -> Result<CheckReport, CheckError> {
    require_sizes(&p.n_list, 2)?;
    let n_top = *p.n_list.last().unwrap();
    let mu = mu_hat(model, p.h, n_top, p.mu_replicas.max(MU_MIN_REPLICAS), p.seed)?;
    let inv_mu = 1.0 / mu.record.point;
    let cut = (1.0 + thresholds::GAP_TAIL_EPS) * inv_mu;
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    let mut tails: Vec<(f64, f64)> = Vec::new();
    for &n in &p.n_list {
        let log_n = (n as f64).ln();
        let per = model.map_replicas(p.h, n, p.replicas, p.seed, 0, |k, _, ws| {
            (0..p.paths)
                .map(|j| {
                    let path = ws.sample_path_seeded(p.seed, (k * p.paths + j) as u64)?;
                    Ok(path.max_gap() as f64 / log_n)
                })
                .collect::<Result<Vec<f64>, _>>()
        })?;
        let all: Vec<f64> = per.into_iter().flatten().collect();
        let med = median(&all);
        let total = all.len() as f64;
        let freq = all.iter().filter(|&&x| x >= cut).count() as f64 / total;
        let se = (freq * (1.0 - freq) / total).sqrt();
        rows.push(json!({
            "n": n,
            "median_gap_over_log_n": med,
            "median_times_mu": med / inv_mu,
            "upper_tail_frequency": freq,
            "upper_tail_std_error": se,
        }));
        medians.push(med);
        tails.push((freq, se));
    }
    let ratio = medians.last().unwrap() * mu.record.point;
    let (lo, hi) = thresholds::GAP_BAND;
    let in_band = ratio >= lo && ratio <= hi;
    let dist = |m: f64| (m - inv_mu).abs();
    let converging = dist(*medians.last().unwrap()) <= dist(medians[0]);
    let tail_decreasing = tail_trend_decreasing(&tails);
    rows.push(json!({
        "mu_hat": mu.record.point,
        "mu_std_error": mu.record.std_error,
        "mu_ess": mu.ess,
        "mu_low_ess": mu.low_ess,
        "in_band": in_band,
        "median_distance_shrinks": converging,
        "upper_tail_decreasing": tail_decreasing,
    }));
    let mut report = CheckReport::new(
        "largest_gap",
        params_with_model(Some(model), p),
        ratio,
        lo,
        Direction::AtLeast,
        ratio <= hi && converging && tail_decreasing,
    )
    .note(format!("statistic = median(M_n / log n) * mu_hat at n = {n_top}; band [{lo}, {hi}]"))
    .note(format!("upper tail at (1 + {}) / mu_hat, trend only", thresholds::GAP_TAIL_EPS))
    .rows(rows);
    if model.cutoff.is_some() {
        report = report.note("approximate: jump cutoff in use");
    }
    Ok(report)
}

/// Each frequency at most the previous one plus `TAIL_SE` standard errors,
/// and an overall decrease (or all zero).
pub(crate) fn tail_trend_decreasing(tails: &[(f64, f64)]) -> bool {
    let stepwise = tails.windows(2).all(|w| w[1].0 <= w[0].0 + thresholds::TAIL_SE * w[0].1.max(w[1].1));
    let first = tails[0].0;
    let last = tails[tails.len() - 1].0;
    stepwise && (last < first || (last == 0.0 && first == 0.0))
}

#[cfg(test)]
mod tests {
    use super::tail_trend_decreasing;

    #[test]
    fn tail_trend_rule() {
        assert!(tail_trend_decreasing(&[(0.3, 0.01), (0.2, 0.01), (0.1, 0.01)]));
        assert!(tail_trend_decreasing(&[(0.3, 0.01), (0.31, 0.01), (0.1, 0.01)]));
        assert!(!tail_trend_decreasing(&[(0.3, 0.01), (0.5, 0.01), (0.1, 0.01)]));
        assert!(!tail_trend_decreasing(&[(0.1, 0.01), (0.1, 0.01)]));
        assert!(tail_trend_decreasing(&[(0.0, 0.0), (0.0, 0.0)]));
    }
}
