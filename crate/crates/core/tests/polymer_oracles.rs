use approx::assert_relative_eq;
use pinlab_core::disorder::{sample, CovarianceSpec};
use pinlab_core::polymer::{brute_force, PolymerWorkspace};
use pinlab_core::renewal::{InterArrivalLaw, SlowlyVarying};
use proptest::prelude::*;

fn law(alpha: f64, n_max: usize) -> InterArrivalLaw {
    InterArrivalLaw::new(alpha, SlowlyVarying::Constant { c: 1.0 }, 1_000_000, n_max).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn specs() -> Vec<CovarianceSpec> {
    vec![
        CovarianceSpec::iid(1.0),
        CovarianceSpec::exp_decay(1.0, 0.5),
        CovarianceSpec::power_law(1.0, 0.2, 0.5),
        CovarianceSpec::finite_range(vec![1.0, 0.3, -0.2]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dp_matches_enumeration(
        alpha_idx in 0usize..3,
        spec_idx in 0usize..4,
        n in 1usize..=12,
        h in -2.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let alpha = [0.5, 1.0, 1.5][alpha_idx];
        let l = law(alpha, 16);
        let omega = sample(&specs()[spec_idx], n, seed).unwrap().values;
        let ws = PolymerWorkspace::build(&l, &omega, h, 2).unwrap();
        let bf = brute_force(&l, &omega, h).unwrap();
        prop_assert!(rel(ws.log_partition(), bf.log_partition) < 1e-12);
        for i in 1..=n {
            prop_assert!(rel(ws.contact_marginal(i), bf.marginals[i - 1]) < 1e-10);
        }
        let m = ws.contact_moments(2).unwrap();
        prop_assert!(rel(m[0], bf.moments[0]) < 1e-10);
        prop_assert!(rel(m[1], bf.moments[1]) < 1e-10);
        prop_assert!(rel(ws.endpoint_mass(), bf.endpoint_mass) < 1e-10);
        for a in 1..=n {
            for b in a..=n {
                prop_assert!((ws.pair_covariance(a, b).unwrap() - bf.covariance(a, b)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn marginals_and_consistency(n in 2usize..80, h in -3.0f64..3.0, seed in any::<u64>()) {
        let l = law(1.0, 80);
        let omega = sample(&CovarianceSpec::exp_decay(1.0, 0.5), n, seed).unwrap().values;
        let ws = PolymerWorkspace::build(&l, &omega, h, 1).unwrap();
        prop_assert!((ws.log_partition() - ws.log_backward()[0]).abs() < 1e-9);
        for i in 1..=n {
            let p = ws.contact_marginal(i);
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(ws.log_forward()[i] + ws.log_backward()[i] <= ws.log_partition() + 1e-9);
            prop_assert!((ws.step_normalization(i) - 1.0).abs() < 1e-9);
        }
        prop_assert_eq!(ws.contact_marginal(n), 1.0);
        let sum: f64 = ws.contact_marginals().iter().sum();
        prop_assert!(rel(ws.contact_moments(1).unwrap()[0], sum) < 1e-8);
        prop_assert!((ws.log_partition_minus() - (ws.log_partition() - h - omega[n - 1])).abs() < 1e-12);
    }
}

#[test]
fn splitting_identities_at_64() {
    let n = 64;
    let l = law(1.0, n);
    let omega = sample(&CovarianceSpec::exp_decay(1.0, 0.5), n, 17).unwrap().values;
    let ws = PolymerWorkspace::build(&l, &omega, 0.8, 0).unwrap();
    for (a, m, b) in [(1, 1, 1), (3, 20, 41), (10, 32, 63), (30, 31, 32), (5, 64, 64), (12, 40, 55)] {
        let cov_am = ws.pair_covariance(a, m).unwrap();
        let lhs = ws.contact_marginal(a);
        let rhs = ws.prefix_marginal(a, m) - cov_am / ws.contact_marginal(m);
        assert!((lhs - rhs).abs() < 1e-8, "first identity at ({a}, {m})");

        if m < n {
            let shifted = PolymerWorkspace::build(&l, &omega[m..], 0.8, 0).unwrap();
            let cov_mb = ws.pair_covariance(m, b).unwrap();
            let lhs = ws.contact_marginal(b);
            let rhs = if b == m {
                1.0 - cov_mb / ws.contact_marginal(m)
            } else {
                shifted.contact_marginal(b - m) - cov_mb / ws.contact_marginal(m)
            };
            assert!((lhs - rhs).abs() < 1e-8, "second identity at ({m}, {b})");
        }
    }
}

#[test]
fn variance_is_sum_of_pair_covariances() {
    for (n, h) in [(20, 0.5), (48, 1.5), (64, -0.5)] {
        let l = law(1.0, n);
        let omega = sample(&CovarianceSpec::iid(1.0), n, n as u64).unwrap().values;
        let ws = PolymerWorkspace::build(&l, &omega, h, 2).unwrap();
        let var = ws.contact_cumulants(2).unwrap()[1];
        let mut total = 0.0;
        for a in 1..=n {
            total += ws.pair_covariance(a, a).unwrap();
            for b in a + 1..=n {
                total += 2.0 * ws.pair_covariance(a, b).unwrap();
            }
        }
        assert_relative_eq!(var, total, max_relative = 1e-6);
    }
}

#[test]
fn profile_agrees_with_pair_covariances() {
    let n = 96;
    let l = law(1.0, n);
    let omega = sample(&CovarianceSpec::power_law(1.0, 0.2, 0.5), n, 4).unwrap().values;
    let ws = PolymerWorkspace::build(&l, &omega, 1.0, 0).unwrap();
    let prof = ws.covariance_profile(40, n).unwrap();
    for (d, c) in prof.iter().enumerate() {
        let direct = ws.pair_covariance(40, 40 + d).unwrap();
        assert!((c - direct).abs() < 1e-12, "lag {d}");
    }
    assert_eq!(*prof.last().unwrap(), 0.0);
}

#[test]
fn h_derivatives_are_cumulants() {
    let n = 128;
    let l = law(1.0, n);
    let omega = sample(&CovarianceSpec::exp_decay(1.0, 0.5), n, 9).unwrap().values;
    let d = 1e-4;
    let at = |h: f64| PolymerWorkspace::build(&l, &omega, h, 0).unwrap().log_partition();
    for h in [-0.5, 0.7, 2.0] {
        let ws = PolymerWorkspace::build(&l, &omega, h, 3).unwrap();
        let k = ws.contact_cumulants(3).unwrap();
        let (lo, mid, hi) = (at(h - d), at(h), at(h + d));
        assert_relative_eq!((hi - lo) / (2.0 * d), k[0], max_relative = 1e-5);
        assert_relative_eq!((hi - 2.0 * mid + lo) / (d * d), k[1], max_relative = 1e-4);
        assert!(k[1] > 0.0);
        // third cumulant needs a wider stencil against rounding
        let e = 1e-2;
        let third = (at(h + 2.0 * e) - 2.0 * at(h + e) + 2.0 * at(h - e) - at(h - 2.0 * e)) / (2.0 * e.powi(3));
        assert!((third - k[2]).abs() < 1e-2 * (1.0 + k[2].abs()), "h {h}: {third} vs {}", k[2]);
    }
}

#[test]
fn partition_is_monotone_in_h() {
    let n = 200;
    let l = law(1.0, n);
    let omega = sample(&CovarianceSpec::iid(1.0), n, 3).unwrap().values;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..30 {
        let h = -1.5 + 0.1 * i as f64;
        let z = PolymerWorkspace::build(&l, &omega, h, 0).unwrap().log_partition();
        assert!(z > prev);
        prev = z;
    }
}

#[test]
fn endpoint_mass_falls_with_h_on_average() {
    let n = 64;
    let l = law(1.0, n);
    let mean = |h: f64| -> f64 {
        (0..100)
            .map(|k| {
                let omega = sample(&CovarianceSpec::iid(1.0), n, 1000 + k).unwrap().values;
                PolymerWorkspace::build(&l, &omega, h, 0).unwrap().endpoint_mass()
            })
            .sum::<f64>()
            / 100.0
    };
    assert!(mean(0.5) > mean(1.0));
    assert!(mean(1.0) > mean(2.0));
    let one = PolymerWorkspace::build(&l, &[0.4], 1.0, 0).unwrap();
    assert_eq!(one.endpoint_mass(), 1.0);
}

#[test]
fn homogeneous_free_energy_matches_root() {
    let n = 4096;
    let l = InterArrivalLaw::new(1.0, SlowlyVarying::Constant { c: 1.0 }, 10_000_000, n).unwrap();
    let zeros = vec![0.0; n];
    for h in [0.5, 1.0, 2.0] {
        let f = PolymerWorkspace::build(&l, &zeros, h, 0).unwrap().log_partition() / n as f64;
        let pure = l.pure_free_energy(h).unwrap();
        assert!((f - pure).abs() <= 0.01, "h {h}: {f} vs {pure}");
    }
}

#[test]
fn homogeneous_covariances_decay() {
    let n = 256;
    let l = law(1.0, n);
    let ws = PolymerWorkspace::build(&l, &vec![0.0; n], 3.0, 0).unwrap();
    let prof = ws.covariance_profile(100, 130).unwrap();
    let (xs, ys): (Vec<f64>, Vec<f64>) = (2..=30).map(|d| (d as f64, prof[d].abs().ln())).unzip();
    let fit = pinlab_core::stats::linear_fit(&xs, &ys);
    assert!(fit.slope < 0.0 && fit.r_squared > 0.9, "{fit:?}");
}
