//! Subset enumeration of all pinned configurations, for tiny systems only.

use super::PolymerError;
use crate::renewal::InterArrivalLaw;

pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub log_partition: f64,
    pub marginals: Vec<f64>,
    /// `E[L_n]`, `E[L_n^2]`
    pub moments: [f64; 2],
    pub endpoint_mass: f64,
    /// `E[X_a X_b]`, row-major `n x n`, 0-based.
    pub joint: Vec<f64>,
}

impl BruteForce {
    pub fn covariance(&self, a: usize, b: usize) -> f64 {
        let n = self.marginals.len();
        self.joint[(a - 1) * n + (b - 1)] - self.marginals[a - 1] * self.marginals[b - 1]
    }
}

/// Every subset of `{1..n-1}` joined with `{n}` is one configuration.
pub fn brute_force(law: &InterArrivalLaw, omega: &[f64], h: f64) -> Result<BruteForce, PolymerError> {
    let n = omega.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(PolymerError::TooLarge(n));
    }
    if n == 0 || n > law.n_max() {
        return Err(PolymerError::SizeMismatch { n, n_max: law.n_max(), omega_len: n });
    }
    let lp = law.log_masses();
    let log_weight = |mask: u32| -> f64 {
        let mut prev = 0;
        let mut w = 0.0;
        for site in 1..=n {
            if site == n || mask & (1 << (site - 1)) != 0 {
                w += lp[site - prev - 1] + h + omega[site - 1];
                prev = site;
            }
        }
        w
    };
    let count = 1u32 << (n - 1);
    let max = (0..count).map(log_weight).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut marg = vec![0.0; n];
    let mut joint = vec![0.0; n * n];
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for mask in 0..count {
        let w = (log_weight(mask) - max).exp();
        total += w;
        let sites: Vec<usize> =
            (1..=n).filter(|&s| s == n || mask & (1 << (s - 1)) != 0).collect();
        let l = sites.len() as f64;
        m1 += w * l;
        m2 += w * l * l;
        for &a in &sites {
            marg[a - 1] += w;
            for &b in &sites {
                joint[(a - 1) * n + (b - 1)] += w;
            }
        }
    }
    let single = (lp[n - 1] + h + omega[n - 1] - max).exp();
    Ok(BruteForce {
        log_partition: max + total.ln(),
        marginals: marg.iter().map(|m| m / total).collect(),
        moments: [m1 / total, m2 / total],
        endpoint_mass: single / total,
        joint: joint.iter().map(|m| m / total).collect(),
    })
}
