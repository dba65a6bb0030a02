//! Exact quenched computations for one `(law, omega, h)`.
//!
//! The transfer recursions run in a scaled linear domain: every stored
//! forward value is `exp(F[i] - r)` for a running reference `r` that only
//! moves up, and all stored arrays are rescaled together when a new value
//! exceeds `r` by more than `RESCALE_GAP`. The inner loop is then a plain dot
//! product against the linear kernel. `F` itself is kept in log form.

mod brute;
mod sampling;

pub use brute::{brute_force, BruteForce, BRUTE_FORCE_LIMIT};
pub use sampling::PathSample;

use std::io::{self, Write};

use thiserror::Error;

use crate::renewal::InterArrivalLaw;

const RESCALE_GAP: f64 = 200.0;
// below this a scaled accumulator is recomputed in log form
const UNDERFLOW_GUARD: f64 = 1e-250;
pub const MAX_MOMENT_ORDER: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolymerError {
    #[error("system size {n} does not fit the law cache (n_max = {n_max}) or disorder length {omega_len}")]
    SizeMismatch { n: usize, n_max: usize, omega_len: usize },
    #[error("moment order {0} outside 0..=4")]
    MomentOrder(usize),
    #[error("index {index} outside 1..={n}")]
    Index { index: usize, n: usize },
    #[error("step probabilities at j={j} sum to {total}")]
    NumericalLeak { j: usize, total: f64 },
    #[error("brute force limited to n <= 20, got {0}")]
    TooLarge(usize),
}

/// Inter-arrival kernel restricted to `1..=n`, optionally cut off at
/// `t_max` (dropped mass is not renormalized).
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    n: usize,
    t_max: usize,
    // index t-1
    log_p: Vec<f64>,
    p: Vec<f64>,
    // p_rev[n - t] = p(t)
    p_rev: Vec<f64>,
}

impl Kernel {
    fn new(law: &InterArrivalLaw, n: usize, cutoff: Option<usize>) -> Self {
        let t_max = cutoff.unwrap_or(n).clamp(1, n);
        let mut log_p = law.log_masses()[..n].to_vec();
        let mut p = law.masses()[..n].to_vec();
        for t in t_max + 1..=n {
            log_p[t - 1] = f64::NEG_INFINITY;
            p[t - 1] = 0.0;
        }
        let p_rev = p.iter().rev().copied().collect();
        Self { n, t_max, log_p, p, p_rev }
    }

    #[inline]
    fn log_p(&self, t: usize) -> f64 {
        self.log_p[t - 1]
    }

    /// `log sum_{lo <= i < j} exp(F[i] + log p(j-i))`, direct form.
    fn log_sum_into(&self, f: &[f64], j: usize) -> f64 {
        let lo = j.saturating_sub(self.t_max);
        let m = (lo..j).map(|i| f[i] + self.log_p(j - i)).fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + (lo..j).map(|i| (f[i] + self.log_p(j - i) - m).exp()).sum::<f64>().ln()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Forward pass over `energy[0..m]` (site `j` has energy `energy[j-1]`).
/// Returns `F[0..=m]` and, for `q = 1..=r_max`, the ratios
/// `E_j[L_j^q]` stored as `moments[q-1][j]`.
pub(crate) fn forward(kernel: &Kernel, energy: &[f64], r_max: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = energy.len();
    let n = kernel.n;
    debug_assert!(m <= n);
    let mut f = vec![0.0; m + 1];
    let mut scaled = vec![0.0; m + 1];
    // scaled * E_i[L_i^q]
    let mut scaled_moments = vec![vec![0.0; m + 1]; r_max];
    let mut moments = vec![vec![0.0; m + 1]; r_max];
    let mut reference = 0.0;
    scaled[0] = 1.0;
    let mut sums = [0.0f64; MAX_MOMENT_ORDER + 1];

    for j in 1..=m {
        let e = energy[j - 1];
        if e == f64::NEG_INFINITY {
            f[j] = f64::NEG_INFINITY;
            continue;
        }
        let lo = j.saturating_sub(kernel.t_max);
        let kern = &kernel.p_rev[n - (j - lo)..n];
        let acc = dot(&scaled[lo..j], kern);
        if acc > UNDERFLOW_GUARD && acc.is_finite() {
            f[j] = reference + acc.ln() + e;
            for q in 1..=r_max {
                sums[q] = dot(&scaled_moments[q - 1][lo..j], kern) / acc;
            }
        } else {
            let base = kernel.log_sum_into(&f, j);
            f[j] = base + e;
            if base == f64::NEG_INFINITY {
                continue;
            }
            sums[1..=r_max].fill(0.0);
            for i in lo..j {
                let w = (f[i] + kernel.log_p(j - i) - base).exp();
                for q in 1..=r_max {
                    sums[q] += w * moments[q - 1][i];
                }
            }
        }
        // E_j[L^q] = sum_{s<=q} C(q,s) E[L_i^s] with L_j = L_i + 1
        sums[0] = 1.0;
        for q in 1..=r_max {
            let mut v = 0.0;
            let mut binom = 1.0;
            for s in 0..=q {
                v += binom * sums[s];
                binom = binom * (q - s) as f64 / (s + 1) as f64;
            }
            moments[q - 1][j] = v;
        }
        if f[j] - reference > RESCALE_GAP {
            let factor = (reference - f[j]).exp();
            for v in &mut scaled[..j] {
                *v *= factor;
            }
            for arr in &mut scaled_moments {
                for v in &mut arr[..j] {
                    *v *= factor;
                }
            }
            reference = f[j];
        }
        let s = (f[j] - reference).exp();
        scaled[j] = s;
        for q in 1..=r_max {
            scaled_moments[q - 1][j] = s * moments[q - 1][j];
        }
    }
    (f, moments)
}

/// Backward pass: `B[n] = 0`, `B[i] = log sum_{j>i} p(j-i) e^{h+omega_j} e^{B[j]}`.
fn backward(kernel: &Kernel, energy: &[f64]) -> Vec<f64> {
    let n = energy.len();
    let mut b = vec![0.0; n + 1];
    // scaled[j] = exp(energy_j + B[j] - reference)
    let mut scaled = vec![0.0; n + 1];
    let mut reference = energy[n - 1];
    scaled[n] = 1.0;
    for i in (0..n).rev() {
        let hi = (i + kernel.t_max).min(n);
        let acc = dot(&scaled[i + 1..=hi], &kernel.p[..hi - i]);
        b[i] = if acc > UNDERFLOW_GUARD && acc.is_finite() {
            reference + acc.ln()
        } else {
            let terms = (i + 1..=hi).map(|j| kernel.log_p(j - i) + energy[j - 1] + b[j]);
            log_sum_exp_iter(terms)
        };
        if i == 0 {
            break;
        }
        let g = energy[i - 1] + b[i];
        if g - reference > RESCALE_GAP {
            let factor = (reference - g).exp();
            for v in &mut scaled[i + 1..] {
                *v *= factor;
            }
            reference = g;
        }
        scaled[i] = (g - reference).exp();
    }
    b
}

fn log_sum_exp_iter(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Quenched Gibbs measure for one `(law, omega, h)`, pinned at `n`.
#[derive(Debug, Clone)]
pub struct PolymerWorkspace {
    h: f64,
    n: usize,
    kernel: Kernel,
    // energy[j-1] = h + omega_j
    energy: Vec<f64>,
    log_forward: Vec<f64>,
    log_backward: Vec<f64>,
    moment_ratios: Vec<Vec<f64>>,
    r_max: usize,
}

impl PolymerWorkspace {
    /// Exact workspace for the first `omega.len()` sites.
    pub fn build(
        law: &InterArrivalLaw,
        omega: &[f64],
        h: f64,
        r_max: usize,
    ) -> Result<Self, PolymerError> {
        Self::build_with_cutoff(law, omega, h, r_max, None)
    }

    /// With `cutoff = Some(t_max)` jumps longer than `t_max` are dropped and
    /// the cost becomes `O(n * t_max)`. Results are approximate.
    pub fn build_with_cutoff(
        law: &InterArrivalLaw,
        omega: &[f64],
        h: f64,
        r_max: usize,
        cutoff: Option<usize>,
    ) -> Result<Self, PolymerError> {
        let n = omega.len();
        if n == 0 || n > law.n_max() {
            return Err(PolymerError::SizeMismatch { n, n_max: law.n_max(), omega_len: n });
        }
        if r_max > MAX_MOMENT_ORDER {
            return Err(PolymerError::MomentOrder(r_max));
        }
        let kernel = Kernel::new(law, n, cutoff);
        let energy: Vec<f64> = omega.iter().map(|w| h + w).collect();
        let (log_forward, moment_ratios) = forward(&kernel, &energy, r_max);
        let log_backward = backward(&kernel, &energy);
        debug_assert!(log_forward.iter().all(|v| v.is_finite()));
        Ok(Self { h, n, kernel, energy, log_forward, log_backward, moment_ratios, r_max })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_max(&self) -> usize {
        self.r_max
    }

    /// Jump cutoff in use, if the workspace is approximate.
    pub fn cutoff(&self) -> Option<usize> {
        (self.kernel.t_max < self.n).then_some(self.kernel.t_max)
    }

    pub fn is_approximate(&self) -> bool {
        self.cutoff().is_some()
    }

    pub fn log_forward(&self) -> &[f64] {
        &self.log_forward
    }

    pub fn log_backward(&self) -> &[f64] {
        &self.log_backward
    }

    /// `h + omega_i`.
    pub fn site_energy(&self, i: usize) -> f64 {
        self.energy[i - 1]
    }

    /// `log Z_{n,h}(omega)`.
    pub fn log_partition(&self) -> f64 {
        self.log_forward[self.n]
    }

    /// `log Z^-`, the partition function without the last site's reward.
    pub fn log_partition_minus(&self) -> f64 {
        self.log_partition() - self.energy[self.n - 1]
    }

    /// Gibbs probability that `i` is a contact.
    pub fn contact_marginal(&self, i: usize) -> f64 {
        if i == self.n {
            return 1.0;
        }
        (self.log_forward[i] + self.log_backward[i] - self.log_partition()).exp().min(1.0)
    }

    pub fn contact_marginals(&self) -> Vec<f64> {
        (1..=self.n).map(|i| self.contact_marginal(i)).collect()
    }

    /// `E[L_n^m]` for `m = 1..=r`.
    pub fn contact_moments(&self, r: usize) -> Result<Vec<f64>, PolymerError> {
        if r == 0 || r > self.r_max {
            return Err(PolymerError::MomentOrder(r));
        }
        Ok((1..=r).map(|q| self.moment_ratios[q - 1][self.n]).collect())
    }

    /// `E_j[L_j^q]` for the system pinned at `j <= n`.
    pub fn prefix_moment(&self, j: usize, q: usize) -> f64 {
        if j == 0 {
            return if q == 0 { 1.0 } else { 0.0 };
        }
        self.moment_ratios[q - 1][j]
    }

    /// Cumulants `kappa_1..kappa_r` of `L_n` from the raw moments.
    pub fn contact_cumulants(&self, r: usize) -> Result<Vec<f64>, PolymerError> {
        let m = self.contact_moments(r)?;
        let mut k = Vec::with_capacity(r);
        let m1 = m[0];
        k.push(m1);
        if r >= 2 {
            k.push((m[1] - m1 * m1).max(0.0));
        }
        if r >= 3 {
            k.push(m[2] - 3.0 * m[1] * m1 + 2.0 * m1.powi(3));
        }
        if r >= 4 {
            let m2 = m[1];
            k.push(m[3] - 4.0 * m[2] * m1 - 3.0 * m2 * m2 + 12.0 * m2 * m1 * m1 - 6.0 * m1.powi(4));
        }
        Ok(k)
    }

    /// `log P(T_1 = n) = log p(n) - log Z^-`.
    pub fn log_endpoint_mass(&self) -> f64 {
        self.kernel.log_p(self.n) - self.log_partition_minus()
    }

    pub fn endpoint_mass(&self) -> f64 {
        self.log_endpoint_mass().exp().min(1.0)
    }

    /// Probability that the last contact before `j` is `i`, for the system
    /// pinned at `j`.
    pub fn step_probability(&self, j: usize, i: usize) -> f64 {
        if i >= j || j - i > self.kernel.t_max {
            return 0.0;
        }
        (self.log_forward[i] + self.kernel.log_p(j - i) + self.energy[j - 1] - self.log_forward[j])
            .exp()
    }

    /// Sum of all step probabilities out of `j`; 1 up to rounding.
    pub fn step_normalization(&self, j: usize) -> f64 {
        (0..j).map(|i| self.step_probability(j, i)).sum()
    }

    /// `log` of the partition function from `a` to `b` over the shifted
    /// environment, pinned at both ends.
    pub fn log_segment_partition(&self, a: usize, b: usize) -> f64 {
        let (g, _) = forward(&self.kernel, &self.energy[a..b], 0);
        g[b - a]
    }

    /// `Cov(X_a, X_b) = E[X_a X_b] - E[X_a] E[X_b]`, with `E[X_a X_b]` from
    /// a fresh forward pass between `a` and `b`.
    pub fn pair_covariance(&self, a: usize, b: usize) -> Result<f64, PolymerError> {
        self.check_index(a)?;
        self.check_index(b)?;
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if b == self.n {
            return Ok(0.0);
        }
        let pa = self.contact_marginal(a);
        if a == b {
            return Ok(pa * (1.0 - pa));
        }
        let joint = (self.log_forward[a] + self.log_segment_partition(a, b) + self.log_backward[b]
            - self.log_partition())
        .exp();
        Ok(joint - pa * self.contact_marginal(b))
    }

    /// `Cov(X_a, X_j)` for `j = a..=b_max`, accurate in relative terms far
    /// below the rounding level of the marginals.
    ///
    /// Looking backward from a pinned endpoint, the contacts form a Markov
    /// chain with kernel `step_probability`. With `g(x) = E_x[X_a]`,
    /// `Cov(X_a, X_j) = E[X_j] (g(j) - g(n))`. Running the chains from `j`
    /// and from `n` independently until they first share a contact, the
    /// difference only collects pairs that never meet at or above `a`, so
    /// every term is small and no O(1) quantities are subtracted.
    pub fn covariance_profile(&self, a: usize, b_max: usize) -> Result<Vec<f64>, PolymerError> {
        self.check_index(a)?;
        self.check_index(b_max)?;
        if b_max < a {
            return Err(PolymerError::Index { index: b_max, n: self.n });
        }
        let (n, l) = (self.n, b_max - a);
        let pa = self.contact_marginal(a);
        let w = |x: usize, i: usize| self.step_probability(x, i);
        // jump from x to below a
        let below = |x: usize| -> f64 { (x.saturating_sub(self.kernel.t_max)..a).map(|i| w(x, i)).sum() };
        let below_x: Vec<f64> = (a..=b_max).map(below).collect();

        let mut g = vec![0.0; l + 1];
        g[0] = 1.0;
        for x in 1..=l {
            g[x] = (0..x).map(|i| w(a + x, a + i) * g[i]).sum();
        }

        // h[x][y] for y < x: P(no meeting, x-chain hits a) - P(no meeting, y-chain hits a)
        let mut h = vec![0.0; (l + 1) * (l + 1)];
        let at = |h: &[f64], x: usize, y: usize| -> f64 {
            use std::cmp::Ordering::*;
            match x.cmp(&y) {
                Greater => h[x * (l + 1) + y],
                Less => -h[y * (l + 1) + x],
                Equal => 0.0,
            }
        };
        for x in 1..=l {
            for y in 0..x {
                let mut s = -g[y] * below_x[x];
                for xp in 0..x {
                    if xp != y {
                        s += w(a + x, a + xp) * at(&h, xp, y);
                    }
                }
                h[x * (l + 1) + y] = s;
            }
        }

        // chain from n: law of its first contact at or below j, built from j = b_max down
        let mut q = vec![0.0; l];
        let mut q_below = 0.0;
        for z in b_max + 1..=n {
            let pz = self.contact_marginal(z);
            for (y, qy) in q.iter_mut().enumerate() {
                *qy += pz * w(z, a + y);
            }
            q_below += pz * (z.saturating_sub(self.kernel.t_max).min(a)..a).map(|i| w(z, i)).sum::<f64>();
        }
        let mut out = vec![0.0; l + 1];
        out[0] = pa * (1.0 - pa);
        for x in (1..=l).rev() {
            let j = a + x;
            if j < n {
                let d: f64 = (0..x).map(|y| q[y] * at(&h, x, y)).sum::<f64>() + q_below * g[x];
                out[x] = self.contact_marginal(j) * d;
            }
            // the chain from n now also jumps out of j
            let pj = self.contact_marginal(j);
            for (y, qy) in q.iter_mut().enumerate().take(x) {
                *qy += pj * w(j, a + y);
            }
            q_below += pj * below_x[x];
        }
        Ok(out)
    }

    /// `E_m[X_a]` for the system pinned at `m`, `a <= m`.
    pub fn prefix_marginal(&self, a: usize, m: usize) -> f64 {
        if a == m {
            return 1.0;
        }
        let tail = self.log_segment_partition(a, m);
        (self.log_forward[a] + tail - self.log_forward[m]).exp()
    }

    /// Log partition function with contacts forbidden at `sites`.
    pub fn log_partition_avoiding(&self, sites: &[usize]) -> f64 {
        let mut energy = self.energy.clone();
        for &s in sites {
            if s >= 1 && s < self.n {
                energy[s - 1] = f64::NEG_INFINITY;
            }
        }
        forward(&self.kernel, &energy, 0).0[self.n]
    }

    fn check_index(&self, i: usize) -> Result<(), PolymerError> {
        if i == 0 || i > self.n {
            Err(PolymerError::Index { index: i, n: self.n })
        } else {
            Ok(())
        }
    }

    /// `index,log_forward,log_backward` rows for `0..=n`.
    pub fn write_debug_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,log_forward,log_backward")?;
        for i in 0..=self.n {
            writeln!(w, "{},{:.17e},{:.17e}", i, self.log_forward[i], self.log_backward[i])?;
        }
        Ok(())
    }
}
