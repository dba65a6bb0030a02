use pinlab_core::disorder::CovarianceSpec;
use pinlab_core::estimators::*;
use pinlab_core::renewal::{InterArrivalLaw, SlowlyVarying};

fn model(spec: CovarianceSpec, n_max: usize) -> Model {
    let law = InterArrivalLaw::new(1.0, SlowlyVarying::Constant { c: 1.0 }, 10_000_000, n_max).unwrap();
    Model::new(law, spec)
}

#[test]
fn zero_disorder_free_energy_and_mu_hit_the_root() {
    let m = model(CovarianceSpec::iid(0.0), 4096);
    let pure = m.law.pure_free_energy(1.0).unwrap();
    let f = free_energy(&m, 1.0, 4096, 2, 1).unwrap();
    assert!((f.mean.point - pure).abs() <= 0.01);
    assert_eq!(f.mean.std_error, 0.0);
    let mu = mu_hat(&m, 1.0, 2048, 100, 1).unwrap();
    assert!((mu.record.point - pure).abs() <= 0.02, "{}", mu.record.point);
    // every replica carries the same weight
    assert!((mu.ess - 100.0).abs() < 1e-9);
    assert!(!mu.low_ess);
}

#[test]
fn deep_delocalized_free_energy_is_near_zero() {
    let m = model(CovarianceSpec::iid(1.0), 1024);
    let (h, n) = (-10.0, 1024);
    let f = free_energy(&m, h, n, 10, 2).unwrap();
    // single jump to the pinned endpoint, which still carries h + omega_n
    let single = (m.law.mass(n).unwrap() + h) / n as f64;
    assert!((f.mean.point - single).abs() <= 0.02, "{} vs {single}", f.mean.point);
    let sums = replica_summaries(&m, h, n, 10, 2).unwrap();
    let without_end = sums.iter().map(|s| s.log_partition_minus).sum::<f64>() / (10 * n) as f64;
    assert!(without_end.abs() <= 0.02, "{without_end}");
}

#[test]
fn free_energy_increases_with_h_under_common_disorder() {
    let m = model(CovarianceSpec::iid(1.0), 1024);
    let lo = free_energy(&m, 0.5, 1024, 30, 3).unwrap();
    let hi = free_energy(&m, 1.0, 1024, 30, 3).unwrap();
    assert!(lo.mean.point < hi.mean.point);
    assert_eq!(lo.birkhoff.replicas, 1);
}

#[test]
fn rho_from_moments_matches_finite_difference() {
    let m = model(CovarianceSpec::iid(1.0), 1024);
    let d = free_energy_derivatives(&m, 1.0, 1024, 50, 2, 4, StencilOptions::default()).unwrap();
    let rho = &d[0];
    assert_eq!(rho.name, "rho");
    let fd = rho_finite_difference(&m, 1.0, 1024, 50, 4, 1e-3).unwrap();
    let se = rho.std_error.hypot(fd.std_error);
    assert!((rho.point - fd.point).abs() <= 3.0 * se.max(1e-6), "{} vs {}", rho.point, fd.point);
}

#[test]
fn homogeneous_v_matches_pure_second_difference() {
    let m = model(CovarianceSpec::iid(0.0), 4096);
    let d = free_energy_derivatives(&m, 1.0, 4096, 2, 2, 5, StencilOptions::default()).unwrap();
    let e = 1e-3;
    let f = |h: f64| m.law.pure_free_energy(h).unwrap();
    let v_pure = (f(1.0 + e) - 2.0 * f(1.0) + f(1.0 - e)) / (e * e);
    assert!((d[1].point - v_pure).abs() <= 5e-3, "{} vs {v_pure}", d[1].point);
}

#[test]
fn v_is_positive_and_third_order_runs() {
    let m = model(CovarianceSpec::iid(1.0), 512);
    for h in [0.5, 1.0, 2.0] {
        let d = free_energy_derivatives(&m, h, 512, 30, 3, 6, StencilOptions::default()).unwrap();
        assert_eq!(d.len(), 3);
        assert!(d[1].point > 3.0 * d[1].std_error, "h {h}");
        assert!(d[2].method.contains("difference"));
    }
}

#[test]
fn centering_offsets_stay_bounded() {
    let m = model(CovarianceSpec::iid(1.0), 1024);
    let a = centering_statistics(&m, 1.0, 512, 200, 7).unwrap();
    let b = centering_statistics(&m, 1.0, 1024, 200, 7).unwrap();
    let off_a = a.offsets.last().unwrap().1;
    let off_b = b.offsets.last().unwrap().1;
    assert!(off_b < 2.0 * off_a.max(1.0), "{off_a} -> {off_b}");
}

#[test]
fn correlated_disorder_has_positive_w() {
    let m = model(CovarianceSpec::exp_decay(1.0, 0.5), 512);
    let c = centering_statistics(&m, 1.0, 512, 200, 8).unwrap();
    assert!(c.w_hat.point > 3.0 * c.w_hat.std_error);
}

#[test]
fn critical_scan_brackets_zero_for_the_pure_model() {
    let m = model(CovarianceSpec::iid(0.0), 1024);
    let grid: Vec<f64> = (0..9).map(|k| -1.0 + 0.25 * k as f64).collect();
    let scan = critical_point_scan(&m, &grid, 1024, 100, 9).unwrap();
    assert!(scan.h_c.abs() <= 0.25 + 1e-12, "{}", scan.h_c);
    assert!(scan.annealed_bound_ok);
    assert_eq!(scan.free_energy.len(), grid.len());

    let fine: Vec<f64> = (0..17).map(|k| -1.0 + 0.125 * k as f64).collect();
    let refined = critical_point_scan(&m, &fine, 1024, 100, 9).unwrap();
    let width = |s: &CriticalScan| s.bracket.1 - s.bracket.0;
    assert!((width(&refined) - width(&scan) / 2.0).abs() < 1e-12);
}

#[test]
fn critical_scan_respects_the_annealed_bound() {
    let m = model(CovarianceSpec::iid(1.0), 512);
    let grid: Vec<f64> = (0..9).map(|k| -1.0 + 0.25 * k as f64).collect();
    let scan = critical_point_scan(&m, &grid, 512, 100, 10).unwrap();
    assert!(scan.h_c <= 0.25);
    assert!(scan.annealed_bound_ok);
    assert!(matches!(
        critical_point_scan(&m, &[1.0, 1.5, 2.0, 2.5, 3.0], 256, 100, 10),
        Err(EstimatorError::NotBracketed(_))
    ));
}
