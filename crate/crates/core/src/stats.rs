//! Small statistics helpers shared by estimators and checks.

use serde::Serialize;
use statrs::function::erf::erfc;

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log((1/k) sum exp(x_i))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// Kish effective sample size of weights `exp(log_w)`.
pub fn effective_sample_size(log_w: &[f64]) -> f64 {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (s1, s2) = log_w.iter().fold((0.0, 0.0), |(a, b), x| {
        let w = (x - m).exp();
        (a + w, b + w * w)
    });
    s1 * s1 / s2
}

/// Standard error of `log(mean(exp(x)))` by the delta method.
pub fn log_mean_exp_se(xs: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let mean = w.iter().sum::<f64>() / k;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (var / k).sqrt() / mean
}

/// Welford accumulator; `merge` is the pairwise combination rule, so
/// partial results from workers can be folded in any grouping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        RunningStats {
            count,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.count as f64 * w,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::default();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Two-pass mean and sample variance; exact `(x, 0)` for constant input.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    if let Some(&first) = xs.first() {
        if xs.iter().all(|&x| x == first) {
            return (first, 0.0);
        }
    }
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var)
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let (m, v) = mean_var(xs);
    (m, (v / xs.len() as f64).sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_se: f64,
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = if x.len() > 2 { (sse / (k - 2.0) / sxx).sqrt() } else { f64::NAN };
    LinearFit { slope, intercept, r_squared, slope_se }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Kolmogorov-Smirnov distance between the sample and `cdf`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    // ties (lattice-valued samples) are stepped over as a block
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d = d.max((f - i as f64 / k).abs()).max(((j + 1) as f64 / k - f).abs());
        i = j + 1;
    }
    d
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn log_sum_exp_basics() {
        assert_relative_eq!(log_sum_exp(&[0.0, 0.0]), 2f64.ln());
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_relative_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln());
        assert_relative_eq!(log_mean_exp(&[3.0; 7]), 3.0, epsilon = 1e-15);
        assert_relative_eq!(effective_sample_size(&[-2.0; 10]), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_line_fit() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y);
        assert_relative_eq!(f.slope, -0.5, epsilon = 1e-14);
        assert_relative_eq!(f.intercept, 2.0, epsilon = 1e-14);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn ks_against_known_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_relative_eq!(normal_cdf(1.959_963_984_540_054), 0.975, epsilon = 1e-11);
        // one point at 0: the empirical cdf jumps 0 -> 1 where Phi = 0.5
        assert_relative_eq!(ks_statistic(&[0.0], normal_cdf), 0.5, epsilon = 1e-15);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    proptest! {
        #[test]
        fn merge_matches_sequential(xs in prop::collection::vec(-1e3f64..1e3, 2..60), cut in 0usize..60) {
            let cut = cut.min(xs.len());
            let all: RunningStats = xs.iter().copied().collect();
            let left: RunningStats = xs[..cut].iter().copied().collect();
            let right: RunningStats = xs[cut..].iter().copied().collect();
            let merged = left.merge(&right);
            prop_assert_eq!(merged.count, all.count);
            prop_assert!((merged.mean - all.mean).abs() <= 1e-9 * (1.0 + all.mean.abs()));
            prop_assert!((merged.variance() - all.variance()).abs() <= 1e-8 * (1.0 + all.variance()));
            let (m, v) = mean_var(&xs);
            prop_assert!((m - all.mean).abs() <= 1e-9 * (1.0 + m.abs()));
            prop_assert!((v - all.variance()).abs() <= 1e-8 * (1.0 + v));
        }

        #[test]
        fn log_sum_exp_is_shift_equivariant(xs in prop::collection::vec(-50f64..50.0, 1..20), c in -500f64..500.0) {
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            prop_assert!((log_sum_exp(&shifted) - log_sum_exp(&xs) - c).abs() < 1e-9);
            let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(log_sum_exp(&xs) >= m);
            prop_assert!(log_sum_exp(&xs) <= m + (xs.len() as f64).ln() + 1e-12);
        }

        #[test]
        fn ks_is_a_distance(xs in prop::collection::vec(-5f64..5.0, 1..100)) {
            let d = ks_statistic(&xs, normal_cdf);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
