//! Polynomial decay of `u * w * u` with `u_k = e^{-eps |k|}` and
//! `w_k = (1 + |k|)^{-1-a}`, by direct summation.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{params_with_model, CheckError, CheckReport, Direction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionParams {
    pub eps: f64,
    pub a: f64,
    pub a_prime: f64,
    pub k_max: usize,
}

/// Window half-width beyond which `u` (and `u * u`) is below `1e-16` of
/// its peak relative to anything we add it to.
fn window(eps: f64) -> usize {
    ((40.0 + (1.0 / eps).ln().max(0.0)) / eps).ceil() as usize + 8
}

/// `(u * w)_k` and `(u * w * u)_k` for `k = 0..=k_max`.
pub fn convolution_sequences(eps: f64, a: f64, k_max: usize) -> (Vec<f64>, Vec<f64>) {
    let wd = window(eps) as i64;
    let u = |k: i64| (-eps * k.abs() as f64).exp();
    let w = |k: i64| (1.0 + k.abs() as f64).powf(-1.0 - a);
    // (u * u)_m for |m| <= 2 wd, direct
    let uu: Vec<f64> = (-2 * wd..=2 * wd)
        .map(|m| (-wd..=wd).map(|i| u(i) * u(m - i)).sum())
        .collect();
    let single = (0..=k_max as i64)
        .map(|k| (-wd..=wd).map(|i| u(i) * w(k - i)).sum())
        .collect();
    let double = (0..=k_max as i64)
        .map(|k| {
            (-2 * wd..=2 * wd)
                .zip(&uu)
                .map(|(m, v)| v * w(k - m))
                .sum()
        })
        .collect();
    (single, double)
}

/// Passes when `(u*w*u)_k (1+k)^{1+a'}` peaks at `k0 <= k_max / 10` and is
/// non-increasing from `k0` on.
pub fn check_convolution_decay(p: &ConvolutionParams) -> Result<CheckReport, CheckError> {
    if !(0.0 < p.a_prime && p.a_prime < p.a && p.a < 1.0) || !(p.eps > 0.0) || p.k_max > 100_000 || p.k_max < 10 {
        return Err(CheckError::InvalidParameters("need 0 < a' < a < 1, eps > 0, 10 <= k_max <= 1e5".into()));
    }
    let (single, double) = convolution_sequences(p.eps, p.a, p.k_max);
    let norm: Vec<f64> = double
        .iter()
        .enumerate()
        .map(|(k, v)| v * (1.0 + k as f64).powf(1.0 + p.a_prime))
        .collect();
    let (k0, sup) = norm
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bk, bv), (k, &v)| if v > bv { (k, v) } else { (bk, bv) });
    let tol = 1e-12;
    let monotone = norm[k0..].windows(2).all(|w| w[1] <= w[0] * (1.0 + tol));
    let peak_at_zero = double[0] > double[1];
    let single_norm: Vec<f64> = single
        .iter()
        .enumerate()
        .map(|(k, v)| v * (1.0 + k as f64).powf(1.0 + p.a))
        .collect();
    let single_sup = single_norm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut rows = Vec::new();
    let mut k = 1usize;
    while k <= p.k_max {
        rows.push(json!({"k": k, "double": double[k], "normalized": norm[k], "single_normalized": single_norm[k]}));
        k *= 10;
    }
    rows.push(json!({"k0": k0, "sup": sup, "C_min": sup, "single_sup": single_sup, "single_at_k_max": single_norm[p.k_max]}));
    let limit = (p.k_max / 10) as f64;
    Ok(CheckReport::new(
        "convolution_decay",
        params_with_model::<_>(None, p),
        k0 as f64,
        limit,
        Direction::AtMost,
        monotone && peak_at_zero,
    )
    .note(format!("sup of the normalized sequence {sup:.6e} at k0 = {k0}; non-increasing after: {monotone}"))
    .note(format!("single convolution (u*w)_k (1+k)^(1+a) bounded by {single_sup:.6e}"))
    .rows(rows))
}
