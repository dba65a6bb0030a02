use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use pinlab::output::{parse_csv, records_to_csv, sha256_hex, CSV_HEADER};
use pinlab::{run, workers_from_env, Command, ExperimentConfig, Overrides, RunError, RunManifest};
use pinlab_core::disorder::{CovarianceSpec, DisorderSample, DisorderSampler};
use pinlab_core::estimators::EstimateRecord;
use proptest::prelude::*;

const LAW: &str = r#"
[law]
alpha = 1.0
horizon = 10000000
n_max = 8192
ell = { kind = "constant", c = 1.0 }
"#;

const IID: &str = r#"
[spec]
family = "iid"
variance = 1.0
label = "iid"
"#;

fn config(head: &str, spec: &str, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml(&format!("{head}\n{LAW}\n{spec}")).unwrap();
    c.output_dir = Some(out.to_path_buf());
    c
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn field_of(e: RunError) -> String {
    match e {
        RunError::Validation { field, .. } => field,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn free_energy_matches_golden_csv() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("seed = 7\nh_grid = [0.5, 1.0, 2.0]\nn = 1024\nreplicas = 50", IID, dir.path());
    let outcome = run(&c, Command::FreeEnergy, None).unwrap();
    assert_eq!(outcome.exit_code, 0);
    let got = fs::read_to_string(dir.path().join("free-energy.csv")).unwrap();
    let want = include_str!("golden/free_energy.csv");
    assert_eq!(got, want);
}

#[test]
fn same_config_is_byte_identical_across_runs_and_workers() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let head = "seed = 3\nh = 1.0\nn_list = [32, 48, 64, 80]\nreplicas = 8\npaths = 4\nmax_lag = 10";
    let ca = config(head, IID, a.path());
    let cb = config(head, IID, b.path());
    run(&ca, Command::Decay, Some(1)).unwrap();
    run(&cb, Command::Decay, Some(3)).unwrap();
    assert_eq!(fs::read(a.path().join("decay.json")).unwrap(), fs::read(b.path().join("decay.json")).unwrap());
    let ca = config("seed = 5\nh_grid = [0.5, 1.5]\nn = 200\nreplicas = 12", IID, a.path());
    let cb = config("seed = 5\nh_grid = [0.5, 1.5]\nn = 200\nreplicas = 12", IID, b.path());
    run(&ca, Command::FreeEnergy, Some(2)).unwrap();
    run(&cb, Command::FreeEnergy, None).unwrap();
    assert_eq!(fs::read(a.path().join("free-energy.csv")).unwrap(), fs::read(b.path().join("free-energy.csv")).unwrap());
}

#[test]
fn manifest_lists_every_output_with_its_digest() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("seed = 9\nh = 1.0\nn = 128\nreplicas = 3", IID, dir.path());
    let outcome = run(&c, Command::Derivatives, None).unwrap();
    let m: RunManifest = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m, outcome.manifest);
    assert_eq!(m.config, c);
    assert_eq!(m.command, Command::Derivatives);
    assert_eq!(m.outputs.len(), 1);
    for d in &m.outputs {
        let bytes = fs::read(dir.path().join(&d.file)).unwrap();
        assert_eq!(d.bytes, bytes.len());
        assert_eq!(d.sha256, sha256_hex(&bytes));
    }
    assert_eq!(m.sampling.len(), 1);
    assert_eq!(m.sampling[0].route, "independent");
    assert!(m.normalization.tail_error_bound < 1e-12);
    // no stray temporaries left behind
    let mut names: Vec<String> =
        fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["derivatives.csv", "manifest.json"]);
    let recs = parse_csv(&fs::read(dir.path().join("derivatives.csv")).unwrap()).unwrap();
    let names: Vec<&str> = recs.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["rho", "v"]);
}

#[test]
fn cutoff_runs_are_labeled_approximate() {
    let dir = tempfile::tempdir().unwrap();
    let c = config("seed = 1\nh = 1.0\nn = 64\nreplicas = 4\napproximate_cutoff = 16", IID, dir.path());
    let outcome = run(&c, Command::FreeEnergy, None).unwrap();
    assert!(outcome.manifest.approximate);
    let recs = parse_csv(&fs::read(dir.path().join("free-energy.csv")).unwrap()).unwrap();
    assert!(recs[0].method.contains("approximate"), "{}", recs[0].method);
}

#[test]
fn disorder_dump_reads_back_as_the_sampled_field() {
    let dir = tempfile::tempdir().unwrap();
    let spec = "[spec]\nfamily = \"exp-decay\"\ngamma0 = 1.0\nrho = 0.5\nlabel = \"e\"";
    let c = config("seed = 31\nn = 100\nreplicas = 3", spec, dir.path());
    let outcome = run(&c, Command::SampleDisorder, None).unwrap();
    assert_eq!(outcome.manifest.outputs.len(), 3);
    let sampler = DisorderSampler::new(&CovarianceSpec::exp_decay(1.0, 0.5), 100).unwrap();
    for k in 0..3u64 {
        let bytes = fs::read(dir.path().join(format!("disorder_{k:05}.bin"))).unwrap();
        assert_eq!(bytes.len(), 16 + 8 * 100);
        let values = DisorderSample::read_binary(bytes.as_slice()).unwrap();
        let expect: Vec<f64> = (0..100).map(|i| sampler.sample(31, k).omega(i + 1)).collect();
        assert_eq!(values, expect);
    }
    assert!(outcome.manifest.sampling[0].route.starts_with("circulant"));
}

#[test]
fn validation_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let ok = "seed = 1\nh = 1.0\nn = 64\nreplicas = 4";
    let c = config(ok, IID, dir.path());
    assert_eq!(field_of(run(&c, Command::Mu, None).unwrap_err()), "replicas");
    assert_eq!(field_of(run(&c, Command::Gap, None).unwrap_err()), "paths");

    let mut c2 = c.clone();
    c2.seed = None;
    assert_eq!(field_of(run(&c2, Command::FreeEnergy, None).unwrap_err()), "seed");
    let mut c2 = c.clone();
    c2.n = Some(10_000);
    assert_eq!(field_of(run(&c2, Command::FreeEnergy, None).unwrap_err()), "n");
    let mut c2 = c.clone();
    c2.h_grid = Some(vec![0.5]);
    assert_eq!(field_of(run(&c2, Command::FreeEnergy, None).unwrap_err()), "h");
    let mut c2 = c.clone();
    c2.law.alpha = -1.0;
    assert_eq!(field_of(run(&c2, Command::FreeEnergy, None).unwrap_err()), "law");
    let mut c2 = c.clone();
    c2.spec = None;
    assert_eq!(field_of(run(&c2, Command::FreeEnergy, None).unwrap_err()), "spec");
    let mut c2 = c.clone();
    c2.spec = Some(CovarianceSpec::finite_range(vec![1.0, 0.8, 0.8]));
    assert_eq!(field_of(run(&c2, Command::FreeEnergy, None).unwrap_err()), "spec");
    let mut c2 = c.clone();
    c2.order = Some(4);
    assert_eq!(field_of(run(&c2, Command::Derivatives, None).unwrap_err()), "order");
    let mut c2 = c.clone();
    c2.command = Some(Command::Clt);
    assert_eq!(field_of(run(&c2, Command::FreeEnergy, None).unwrap_err()), "command");
    let mut c2 = c.clone();
    c2.law.n_max = 256;
    c2.n = Some(64);
    assert_eq!(field_of(run(&c2, Command::Verify, None).unwrap_err()), "law.n_max");
    // nothing written for rejected configs
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn malformed_configs_are_config_errors() {
    for text in ["seed = ", "seed = 1\nbogus = 2\n[law]\nalpha = 1.0", "seed = 1"] {
        assert!(matches!(ExperimentConfig::from_toml(text), Err(RunError::Config(_))), "{text}");
    }
}

#[test]
fn overrides_replace_scalars_and_grids() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config("seed = 1\nh_grid = [0.5, 1.0]\nn = 64\nreplicas = 4", IID, dir.path());
    c.apply(&Overrides { h: Some(vec![2.0]), ..Default::default() });
    assert_eq!((c.h, c.h_grid.clone()), (Some(2.0), None));
    c.apply(&Overrides { h: Some(vec![-1.0, 1.0]), n: Some(vec![32, 64]), ..Default::default() });
    assert_eq!((c.h, c.h_grid.clone()), (None, Some(vec![-1.0, 1.0])));
    assert_eq!((c.n, c.n_list.clone()), (None, Some(vec![32, 64])));
    c.apply(&Overrides { replicas: Some(9), seed: Some(42), out: Some("elsewhere".into()), ..Default::default() });
    assert_eq!((c.replicas, c.seed), (Some(9), Some(42)));
    assert_eq!(c.output_dir(), PathBuf::from("elsewhere"));
    c.apply(&Overrides::default());
    assert_eq!(c.seed, Some(42));
}

#[test]
fn worker_env_parsing() {
    assert_eq!(workers_from_env(None).unwrap(), None);
    assert_eq!(workers_from_env(Some("")).unwrap(), None);
    assert_eq!(workers_from_env(Some(" 4 ")).unwrap(), Some(4));
    for bad in ["0", "-2", "many"] {
        assert_eq!(field_of(workers_from_env(Some(bad)).unwrap_err()), "PINLAB_WORKERS");
    }
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let mut seen = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let c = ExperimentConfig::from_toml(&fs::read_to_string(&path).unwrap()).unwrap();
        assert!(c.command.is_some(), "{}", path.display());
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        seen += 1;
    }
    assert!(seen >= 9);
}

#[test]
fn csv_round_trip_edges() {
    let empty = records_to_csv(&[]);
    assert_eq!(String::from_utf8(empty.clone()).unwrap(), format!("{}\n", CSV_HEADER.join(",")));
    assert!(parse_csv(&empty).unwrap().is_empty());
    let one = EstimateRecord {
        name: "free_energy".into(),
        h: -0.1,
        n: 7,
        replicas: 2,
        point: 1.0 / 3.0,
        std_error: 0.0,
        method: "replica-mean, approximate".into(),
        seed: u64::MAX,
    };
    assert_eq!(parse_csv(&records_to_csv(std::slice::from_ref(&one))).unwrap(), vec![one]);
    assert!(parse_csv(b"a,b\n1,2\n").is_err());
}

#[test]
fn csv_round_trip_ten_thousand_rows() {
    let recs: Vec<EstimateRecord> = (0..10_000)
        .map(|i| EstimateRecord {
            name: format!("q{}", i % 7),
            h: (i as f64).sin() * 3.0,
            n: i + 1,
            replicas: 100,
            point: (i as f64 * 0.37).exp() / 1e10,
            std_error: 1.0 / (i as f64 + 1.0),
            method: "m".into(),
            seed: (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
        })
        .collect();
    assert_eq!(parse_csv(&records_to_csv(&recs)).unwrap(), recs);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![any::<f64>().prop_filter("finite", |x| x.is_finite()), -1e3..1e3f64, Just(0.0), Just(-0.0)]
}

prop_compose! {
    fn record()(name in "[a-z_]{1,12}", h in finite(), n in 1usize..10_000, replicas in 1usize..10_000,
                point in finite(), se in finite(), method in "[ -~]{0,20}", seed in any::<u64>()) -> EstimateRecord {
        EstimateRecord { name, h, n, replicas, point, std_error: se, method, seed }
    }
}

proptest! {
    #[test]
    fn csv_round_trips(recs in proptest::collection::vec(record(), 0..40)) {
        let back = parse_csv(&records_to_csv(&recs)).unwrap();
        prop_assert_eq!(back.len(), recs.len());
        for (a, b) in back.iter().zip(&recs) {
            prop_assert_eq!(&a.name, &b.name);
            prop_assert_eq!(a.h.to_bits(), b.h.to_bits());
            prop_assert_eq!(a.point.to_bits(), b.point.to_bits());
            prop_assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
            prop_assert_eq!((a.n, a.replicas, a.seed), (b.n, b.replicas, b.seed));
            prop_assert_eq!(&a.method, &b.method);
        }
    }

    #[test]
    fn config_round_trips(seed in proptest::option::of(any::<u64>()), h in proptest::option::of(-5.0..5.0f64),
                          grid in proptest::option::of(proptest::collection::vec(-5.0..5.0f64, 1..5)),
                          n in proptest::option::of(1usize..8192), replicas in proptest::option::of(1usize..1000),
                          rho in 0.0..0.9f64, cutoff in proptest::option::of(1usize..100)) {
        let mut c = config("", IID, Path::new("out"));
        c.seed = seed;
        c.h = h;
        c.h_grid = grid;
        c.n = n;
        c.replicas = replicas;
        c.approximate_cutoff = cutoff;
        c.spec = Some(CovarianceSpec::exp_decay(1.0, rho));
        prop_assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }
}

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_pinlab"))
}

#[test]
fn binary_applies_flags_and_reports_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, format!("seed = 1\nh = 1.0\nn = 64\nreplicas = 4\n{LAW}\n{IID}")).unwrap();
    let out = dir.path().join("o");
    let status = bin()
        .args(["free-energy", "--config"])
        .arg(&cfg)
        .args(["--h", "-0.5,1.5", "--n", "80", "--seed", "12", "--out"])
        .arg(&out)
        .env_remove("PINLAB_WORKERS")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let recs = parse_csv(&fs::read(out.join("free-energy.csv")).unwrap()).unwrap();
    let hs: Vec<f64> = recs.iter().map(|r| r.h).collect();
    assert_eq!(hs, [-0.5, 1.5]);
    assert!(recs.iter().all(|r| r.n == 80 && r.seed == 12));

    let bad = bin().args(["mu", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("replicas"));

    let env = bin().args(["free-energy", "--config"]).arg(&cfg).env("PINLAB_WORKERS", "zero").output().unwrap();
    assert_eq!(env.status.code(), Some(2));

    let missing = bin().args(["free-energy", "--config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn failed_checks_exit_with_one() {
    // a delocalized h makes the endpoint fit meaningless, so the decay check fails
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, format!("seed = 1\nh = -3.0\nn_list = [16, 24, 32, 48]\nreplicas = 4\npaths = 2\nmax_lag = 6\n{LAW}\n{IID}"))
        .unwrap();
    let res = bin().args(["decay", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(res.status.code(), Some(1), "{}", String::from_utf8_lossy(&res.stderr));
    let reports: Vec<serde_json::Value> = serde_json::from_slice(&fs::read(dir.path().join("o/decay.json")).unwrap()).unwrap();
    assert_eq!(reports.len(), 3);
    assert!(reports.iter().any(|r| r["passed"] == false));
}
