//! Exact path sampling by walking the forward table backwards from `n`.

use rand::Rng;
use serde::Serialize;

use super::{PolymerError, PolymerWorkspace};
use crate::rng::{stream_rng, Lane};

const LEAK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathSample {
    /// Contacts in increasing order; the last one is `n`.
    pub renewal_points: Vec<usize>,
    pub gaps: Vec<usize>,
}

impl PathSample {
    fn from_points(renewal_points: Vec<usize>) -> Self {
        let mut prev = 0;
        let gaps = renewal_points
            .iter()
            .map(|&x| {
                let g = x - prev;
                prev = x;
                g
            })
            .collect();
        Self { renewal_points, gaps }
    }

    /// `L_n`.
    pub fn contacts(&self) -> usize {
        self.renewal_points.len()
    }

    /// `M_n`.
    pub fn max_gap(&self) -> usize {
        self.gaps.iter().copied().max().unwrap_or(0)
    }

    /// Contacts strictly before `n`.
    pub fn interior(&self) -> &[usize] {
        &self.renewal_points[..self.renewal_points.len() - 1]
    }
}

impl PolymerWorkspace {
    /// One exact draw from the Gibbs measure. From `j` the previous contact
    /// `i` is found by inverse CDF, scanning `i = j-1, j-2, ...` so that the
    /// expected cost of a step is the expected gap.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PathSample, PolymerError> {
        let mut points = Vec::new();
        let mut j = self.n;
        while j > 0 {
            points.push(j);
            let u: f64 = rng.random();
            let lo = j.saturating_sub(self.kernel.t_max);
            let shift = self.energy[j - 1] - self.log_forward[j];
            let mut cum = 0.0;
            let mut chosen = None;
            let mut last_positive = None;
            for i in (lo..j).rev() {
                let w = (self.log_forward[i] + self.kernel.log_p(j - i) + shift).exp();
                if w > 0.0 {
                    last_positive = Some(i);
                }
                cum += w;
                if u < cum {
                    chosen = Some(i);
                    break;
                }
            }
            j = match chosen {
                Some(i) => i,
                None if (cum - 1.0).abs() <= LEAK_TOLERANCE => {
                    last_positive.ok_or(PolymerError::NumericalLeak { j, total: cum })?
                }
                None => return Err(PolymerError::NumericalLeak { j, total: cum }),
            };
        }
        points.reverse();
        Ok(PathSample::from_points(points))
    }

    /// Path number `index` under `seed`, from its own stream.
    pub fn sample_path_seeded(&self, seed: u64, index: u64) -> Result<PathSample, PolymerError> {
        self.sample_path(&mut stream_rng(seed, Lane::Paths, index))
    }

    /// `log P(second path has no interior contact in common with `path`)`,
    /// an exact conditional probability under the product measure.
    pub fn log_avoidance_probability(&self, path: &PathSample) -> f64 {
        if path.interior().is_empty() {
            return 0.0;
        }
        (self.log_partition_avoiding(path.interior()) - self.log_partition()).min(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::super::PolymerWorkspace;
    use crate::renewal::{InterArrivalLaw, SlowlyVarying};

    fn law(n: usize) -> InterArrivalLaw {
        InterArrivalLaw::new(1.0, SlowlyVarying::Constant { c: 1.0 }, 1_000_000, n).unwrap()
    }

    #[test]
    fn single_site_path() {
        let ws = PolymerWorkspace::build(&law(4), &[0.2], 1.0, 0).unwrap();
        let p = ws.sample_path_seeded(1, 0).unwrap();
        assert_eq!(p.renewal_points, vec![1]);
        assert_eq!((p.contacts(), p.max_gap()), (1, 1));
        assert_eq!(ws.log_avoidance_probability(&p), 0.0);
    }

    #[test]
    fn paths_are_valid_and_reproducible() {
        let omega: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let ws = PolymerWorkspace::build(&law(200), &omega, 0.5, 0).unwrap();
        for k in 0..50 {
            let p = ws.sample_path_seeded(9, k).unwrap();
            assert_eq!(*p.renewal_points.last().unwrap(), 200);
            assert!(p.renewal_points.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(p.gaps.iter().sum::<usize>(), 200);
            assert_eq!(p.contacts(), p.gaps.len());
            assert_eq!(p, ws.sample_path_seeded(9, k).unwrap());
        }
        for j in [1, 50, 200] {
            assert!((ws.step_normalization(j) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn avoidance_probability_is_a_probability() {
        let omega = vec![0.0; 60];
        let ws = PolymerWorkspace::build(&law(60), &omega, 1.0, 0).unwrap();
        let p = ws.sample_path_seeded(3, 0).unwrap();
        let lp = ws.log_avoidance_probability(&p);
        assert!(lp < 0.0 && lp.is_finite());
    }
}
