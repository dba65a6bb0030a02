//! Heavy-tailed inter-arrival law of the underlying renewal process.
//!
//! The law has the shape `p(t) = K * l(t) / t^(1 + alpha)` for `t >= 1`,
//! where `l` is a slowly varying factor from a small menu and `K` is the
//! normalizing constant. Everything is stored in the log domain; a linear
//! copy is kept for the transfer kernels, which rescale on their own.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenewalError {
    #[error("series sum l(t)/t^(1+alpha) diverges for alpha={alpha}, ell={ell:?}")]
    NonSummable { alpha: f64, ell: SlowlyVarying },
    #[error("horizon {horizon} is smaller than n_max {n_max}")]
    InvalidHorizon { horizon: usize, n_max: usize },
    #[error("t={t} outside cached range 1..={n_max}")]
    OutOfRange { t: usize, n_max: usize },
    #[error("root solve for the homogeneous free energy at h={h} did not converge (residual {residual:e})")]
    NoConvergence { h: f64, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Slowly varying factor `l(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SlowlyVarying {
    /// `l(t) = c`
    Constant { c: f64 },
    /// `l(t) = c * log(1 + t)^beta`
    LogPower { c: f64, beta: f64 },
}

impl SlowlyVarying {
    pub fn log_value(&self, t: f64) -> f64 {
        match *self {
            SlowlyVarying::Constant { c } => c.ln(),
            SlowlyVarying::LogPower { c, beta } => c.ln() + beta * t.ln_1p().ln(),
        }
    }

    fn coefficient(&self) -> f64 {
        match *self {
            SlowlyVarying::Constant { c } | SlowlyVarying::LogPower { c, .. } => c,
        }
    }
}

/// Serialized form of a law, as it appears in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawConfig {
    pub alpha: f64,
    pub ell: SlowlyVarying,
    pub horizon: usize,
    pub n_max: usize,
}

impl LawConfig {
    pub fn build(&self) -> Result<InterArrivalLaw, RenewalError> {
        InterArrivalLaw::new(self.alpha, self.ell, self.horizon, self.n_max)
    }
}

#[derive(Debug, Clone)]
pub struct InterArrivalLaw {
    alpha: f64,
    ell: SlowlyVarying,
    horizon: usize,
    n_max: usize,
    log_norm: f64,
    tail_mass: f64,
    // index t-1 holds log p(t)
    log_mass: Vec<f64>,
    mass: Vec<f64>,
}

impl InterArrivalLaw {
    /// Builds and normalizes the law. The normalizing series is summed
    /// exactly up to `horizon`; the remainder is replaced by the integral of
    /// the tail with `l` frozen at `l(horizon)` (for `alpha > 0`).
    pub fn new(
        alpha: f64,
        ell: SlowlyVarying,
        horizon: usize,
        n_max: usize,
    ) -> Result<Self, RenewalError> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(RenewalError::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(ell.coefficient() > 0.0) || !ell.coefficient().is_finite() {
            return Err(RenewalError::InvalidParameter(
                "slowly varying coefficient must be positive".into(),
            ));
        }
        if n_max < 1 || horizon < n_max {
            return Err(RenewalError::InvalidHorizon { horizon, n_max });
        }
        let summable = alpha > 0.0
            || matches!(ell, SlowlyVarying::LogPower { beta, .. } if beta < -1.0);
        if !summable {
            return Err(RenewalError::NonSummable { alpha, ell });
        }

        let log_weight = |t: usize| -> f64 {
            let t = t as f64;
            ell.log_value(t) - (1.0 + alpha) * t.ln()
        };

        // small terms first
        let mut head = 0.0_f64;
        let mut comp = 0.0_f64;
        for t in (1..=horizon).rev() {
            let y = log_weight(t).exp() - comp;
            let s = head + y;
            comp = (s - head) - y;
            head = s;
        }
        let tail = tail_integral(alpha, ell, horizon as f64);
        let total = head + tail;
        let log_norm = -total.ln();

        let log_mass: Vec<f64> = (1..=n_max).map(|t| log_norm + log_weight(t)).collect();
        let mass = log_mass.iter().map(|l| l.exp()).collect();

        Ok(Self {
            alpha,
            ell,
            horizon,
            n_max,
            log_norm,
            tail_mass: tail / total,
            log_mass,
            mass,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ell(&self) -> SlowlyVarying {
        self.ell
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn config(&self) -> LawConfig {
        LawConfig { alpha: self.alpha, ell: self.ell, horizon: self.horizon, n_max: self.n_max }
    }

    /// The constant `K` in `p(t) = K l(t) / t^(1+alpha)`.
    pub fn norm_constant(&self) -> f64 {
        self.log_norm.exp()
    }

    pub fn log_norm_constant(&self) -> f64 {
        self.log_norm
    }

    /// Probability mass assigned to `t > horizon` by the tail estimate.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `log p(t)` for `1 <= t <= n_max`.
    pub fn mass(&self, t: usize) -> Result<f64, RenewalError> {
        if t == 0 || t > self.n_max {
            return Err(RenewalError::OutOfRange { t, n_max: self.n_max });
        }
        Ok(self.log_mass[t - 1])
    }

    /// `log p(t)` from the closed form, valid for any `t >= 1`.
    pub fn log_mass_formula(&self, t: usize) -> f64 {
        let x = t as f64;
        self.log_norm + self.ell.log_value(x) - (1.0 + self.alpha) * x.ln()
    }

    /// Cached `log p(1..=n_max)`, index `t-1`.
    pub fn log_masses(&self) -> &[f64] {
        &self.log_mass
    }

    /// Cached `p(1..=n_max)` in linear scale, index `t-1`.
    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Smallest `xi >= 1` with `p(s+t) <= xi * min(s,t)^xi * p(s) p(t)` and
    /// `p(t) >= (1+t)^(-xi)` for all `s, t <= t_max`, found by bisection on
    /// `xi` with an exhaustive scan of the pairs.
    pub fn xi_bound(&self, t_max: usize) -> Result<f64, RenewalError> {
        if t_max == 0 || t_max > self.n_max {
            return Err(RenewalError::OutOfRange { t: t_max, n_max: self.n_max });
        }
        let lp = |t: usize| self.log_mass_formula(t);
        let feasible = |xi: f64| -> bool {
            let log_xi = xi.ln();
            for t in 1..=t_max {
                if lp(t) < -xi * ((1 + t) as f64).ln() {
                    return false;
                }
            }
            for s in 1..=t_max {
                for t in s..=t_max {
                    let lhs = lp(s + t) - lp(s) - lp(t);
                    if lhs > log_xi + xi * (s as f64).ln() {
                        return false;
                    }
                }
            }
            true
        };
        if feasible(1.0) {
            return Ok(1.0);
        }
        let mut lo = 1.0;
        let mut hi = 2.0;
        while !feasible(hi) {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        Ok(hi)
    }

    /// Laplace transform `sum_t p(t) e^{-b t}` over the cache, plus a bound
    /// on the part beyond `n_max`.
    pub fn laplace(&self, b: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &lp) in self.log_mass.iter().enumerate() {
            let term = (lp - b * (i + 1) as f64).exp();
            acc += term;
            if term < 1e-20 * acc && b > 0.0 {
                return acc;
            }
        }
        let n = self.n_max as f64;
        if b > 0.0 {
            acc + (self.log_mass[self.n_max - 1] - b * (n + 1.0)).exp() / (-(-b).exp_m1())
        } else {
            // b = 0: whatever lies beyond the cache
            acc + (1.0 - self.mass.iter().sum::<f64>()).max(0.0)
        }
    }

    /// Free energy of the homogeneous model: the root `b > 0` of
    /// `sum_t p(t) e^{-b t} = e^{-h}`, or 0 for `h <= 0`.
    pub fn pure_free_energy(&self, h: f64) -> Result<f64, RenewalError> {
        if h <= 0.0 {
            return Ok(0.0);
        }
        let target = (-h).exp();
        let mut lo = 0.0_f64;
        let mut hi = h;
        // laplace(h) <= e^{-h}; guard against rounding at the bracket end
        while self.laplace(hi) > target {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(RenewalError::NoConvergence { h, residual: f64::NAN });
            }
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.laplace(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        let residual = (self.laplace(root) - target).abs();
        if residual > 1e-12 || root * (self.n_max as f64) < 1.0 {
            return Err(RenewalError::NoConvergence { h, residual });
        }
        Ok(root)
    }
}

/// `int_T^inf l(x) x^{-1-alpha} dx` with `l` frozen at `l(T)` when
/// `alpha > 0`; for `alpha = 0` the log-power integral is taken exactly.
fn tail_integral(alpha: f64, ell: SlowlyVarying, horizon: f64) -> f64 {
    if alpha > 0.0 {
        (ell.log_value(horizon) - alpha * horizon.ln()).exp() / alpha
    } else {
        match ell {
            SlowlyVarying::LogPower { c, beta } => {
                c * horizon.ln().powf(beta + 1.0) / (-beta - 1.0)
            }
            SlowlyVarying::Constant { .. } => f64::INFINITY,
        }
    }
}
