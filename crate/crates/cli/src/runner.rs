use std::fs;
use std::path::PathBuf;

use chrono::{SecondsFormat, Utc};
use pinlab_core::disorder::{DisorderSampler, SamplingRoute};
use pinlab_core::estimators::{
    centering_statistics, free_energy, free_energy_derivatives, mu_hat, EstimateRecord, Model,
    StencilOptions, MU_MIN_REPLICAS,
};
use pinlab_core::rng::child_seed;
use pinlab_core::verify::*;

use crate::config::{Command, ExperimentConfig};
use crate::manifest::{Normalization, RunManifest, SamplingEvent, StageSeed};
use crate::output::{emit, emit_csv, FileDigest};
use crate::{validation, RunError};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// 0 on success, 1 when a check failed.
    pub exit_code: i32,
    pub output_dir: PathBuf,
    pub manifest: RunManifest,
}

#[derive(Default)]
struct Products {
    records: Vec<EstimateRecord>,
    reports: Vec<CheckReport>,
    blobs: Vec<(String, Vec<u8>)>,
    stages: Vec<StageSeed>,
    sampling: Vec<SamplingEvent>,
    warnings: Vec<String>,
}

impl Products {
    fn stage(&mut self, stage: String, seed: u64) {
        self.stages.push(StageSeed { stage, seed });
    }

    fn sampler_event(&mut self, model: &Model, n: usize) -> Result<(), RunError> {
        if self.sampling.iter().any(|e| e.n == n) {
            return Ok(());
        }
        let s = DisorderSampler::new(&model.spec, n)?;
        let route = match s.route() {
            SamplingRoute::Independent => "independent".to_string(),
            SamplingRoute::Circulant { embedding } => format!("circulant(m={embedding})"),
            SamplingRoute::Cholesky => "cholesky".to_string(),
        };
        self.sampling.push(SamplingEvent { n, route, fallback: s.fallback().map(str::to_string) });
        Ok(())
    }
}

/// Runs `command` on `config` with `workers` threads (all cores if `None`),
/// writes the outputs into the config's output directory and the manifest
/// last.
pub fn run(config: &ExperimentConfig, command: Command, workers: Option<usize>) -> Result<RunOutcome, RunError> {
    let started_at = Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
    config.check_command(command)?;
    let seed = config.seed()?;
    let law = config.law.build().map_err(|e| validation("law", e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| validation(crate::WORKERS_ENV, e))?;
    let (products, threads) = pool.install(|| {
        let model = match command {
            Command::Verify => None,
            _ => {
                let spec = config.spec()?.clone();
                spec.validate()?;
                Some(Model::new(law.clone(), spec).with_cutoff(config.approximate_cutoff))
            }
        };
        execute(config, command, seed, &law, model.as_ref()).map(|p| (p, rayon::current_num_threads()))
    })?;

    let dir = config.output_dir();
    fs::create_dir_all(&dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
    let mut outputs: Vec<FileDigest> = Vec::new();
    let stem = command.name();
    if !command.is_check() && command != Command::SampleDisorder {
        outputs.push(emit_csv(&dir, &format!("{stem}.csv"), &products.records)?);
    }
    if command.is_check() {
        let json = serde_json::to_vec_pretty(&products.reports).expect("reports serialize");
        outputs.push(emit(&dir, &format!("{stem}.json"), &json)?);
    }
    for (name, bytes) in &products.blobs {
        outputs.push(emit(&dir, name, bytes)?);
    }
    let passed = products.reports.iter().all(|r| r.passed);
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command,
        config: config.clone(),
        started_at,
        finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        workers: threads,
        approximate: config.approximate_cutoff.is_some(),
        stages: products.stages,
        normalization: Normalization::of(&law),
        sampling: products.sampling,
        warnings: products.warnings,
        outputs,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    emit(&dir, "manifest.json", &json)?;
    Ok(RunOutcome { exit_code: if passed { 0 } else { 1 }, output_dir: dir, manifest })
}

fn execute(
    config: &ExperimentConfig,
    command: Command,
    seed: u64,
    law: &pinlab_core::renewal::InterArrivalLaw,
    model: Option<&Model>,
) -> Result<Products, RunError> {
    let mut out = Products::default();
    let model = || model.ok_or_else(|| validation("spec", "required"));
    match command {
        Command::FreeEnergy | Command::Mu | Command::Derivatives | Command::Centering => {
            let m = model()?;
            let n = config.single_n()?;
            let replicas = config.replicas()?;
            out.sampler_event(m, n)?;
            // common random numbers: one seed across the grid
            for h in config.h_values()? {
                out.stage(format!("{} h={h}", command.name()), seed);
                match command {
                    Command::FreeEnergy => out.records.push(free_energy(m, h, n, replicas, seed)?.mean),
                    Command::Mu => {
                        let mu = mu_hat(m, h, n, replicas, seed)?;
                        if mu.low_ess {
                            out.warnings.push(format!("mu at h={h}: effective sample size {:.1} of {replicas} replicas", mu.ess));
                        }
                        out.records.push(mu.record);
                    }
                    Command::Derivatives => {
                        let order = config.order.unwrap_or(2);
                        let recs = free_energy_derivatives(m, h, n, replicas, order, seed, StencilOptions::default())?;
                        out.records.extend(recs);
                    }
                    _ => {
                        let c = centering_statistics(m, h, n, replicas, seed)?;
                        out.records.extend([c.rho_n, c.w_hat, c.rho_bulk]);
                    }
                }
            }
        }
        Command::Gap => {
            let m = model()?;
            let n_list = config.n_values()?;
            for &n in &n_list {
                out.sampler_event(m, n)?;
            }
            out.stage("gap".into(), seed);
            let p = GapParams {
                h: config.single_h()?,
                n_list,
                replicas: config.replicas()?,
                paths: config.paths()?,
                mu_replicas: config.mu_replicas.unwrap_or(2 * MU_MIN_REPLICAS),
                seed,
            };
            out.reports.push(check_largest_gap(m, &p)?);
        }
        Command::Clt => {
            let m = model()?;
            let n = config.single_n()?;
            out.sampler_event(m, n)?;
            out.stage("clt".into(), seed);
            let p = CltParams {
                h: config.single_h()?,
                n,
                omega_replicas: config.replicas()?,
                paths_per_omega: config.paths()?,
                seed,
            };
            out.reports.push(check_clt(m, &p)?);
        }
        Command::Decay => {
            let m = model()?;
            let h = config.single_h()?;
            let n_list = config.n_values()?;
            let replicas = config.replicas()?;
            for &n in &n_list {
                out.sampler_event(m, n)?;
            }
            let n_top = *n_list.iter().max().expect("non-empty");
            let max_lag = config.max_lag.unwrap_or(40).min(n_top / 2 - 1);
            let seeds = [child_seed(seed, 1), child_seed(seed, 2), child_seed(seed, 3)];
            out.stage("endpoint_decay".into(), seeds[0]);
            out.reports.push(check_endpoint_decay(m, &EndpointParams { h, n_list: n_list.clone(), replicas, seed: seeds[0] })?);
            out.stage("gibbs_decay".into(), seeds[1]);
            out.reports.push(check_gibbs_decay(m, &GibbsParams { h, n: n_top, replicas, max_lag, seed: seeds[1] })?);
            out.stage("replica_decoupling".into(), seeds[2]);
            let p = DecouplingParams {
                h,
                n_list,
                replicas,
                paths_per_replica: config.paths.unwrap_or(10),
                seed: seeds[2],
            };
            out.reports.push(check_replica_decoupling(m, &p)?);
        }
        Command::Verify => {
            let profile = config.profile.unwrap_or(SuiteProfile::Quick);
            if law.n_max() < profile.max_n() {
                return Err(validation(
                    "law.n_max",
                    format!("the {profile:?} profile needs n_max >= {}", profile.max_n()),
                ));
            }
            let reports = run_suite(law, profile, seed)?;
            for r in &reports {
                let s = r.params.get("seed").and_then(|v| v.as_u64()).unwrap_or(seed);
                out.stage(r.check_name.clone(), s);
            }
            out.reports = reports;
        }
        Command::SampleDisorder => {
            let m = model()?;
            let n = config.single_n()?;
            let replicas = config.replicas()?;
            out.sampler_event(m, n)?;
            let sampler = DisorderSampler::new(&m.spec, n)?;
            out.stage("sample-disorder".into(), seed);
            for k in 0..replicas {
                let s = sampler.sample(seed, k as u64);
                let mut bytes = Vec::with_capacity(16 + 8 * n);
                s.write_binary(&mut bytes).expect("in-memory write");
                out.blobs.push((format!("disorder_{k:05}.bin"), bytes));
            }
        }
    }
    Ok(out)
}
