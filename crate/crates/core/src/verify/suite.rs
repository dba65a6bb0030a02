//! The default battery of checks at two scales.

use serde::{Deserialize, Serialize};

use super::decay::eps_hat_of;
use super::*;
use crate::disorder::CovarianceSpec;
use crate::renewal::InterArrivalLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteProfile {
    /// Minutes-scale sizes for smoke runs.
    Quick,
    /// Full sizes; a long run.
    Reference,
}

impl SuiteProfile {
    /// Largest system size the profile needs from the law cache.
    pub fn max_n(self) -> usize {
        match self {
            SuiteProfile::Quick => 2048,
            SuiteProfile::Reference => 8192,
        }
    }
}

fn families() -> [CovarianceSpec; 3] {
    [
        CovarianceSpec::iid(1.0),
        CovarianceSpec::exp_decay(1.0, 0.5),
        CovarianceSpec::power_law(1.0, 0.2, 0.5),
    ]
}

/// Runs every check once; each derives its own seed from `seed`.
pub fn run_suite(law: &InterArrivalLaw, profile: SuiteProfile, seed: u64) -> Result<Vec<CheckReport>, CheckError> {
    if law.n_max() < profile.max_n() {
        return Err(CheckError::InvalidParameters(format!(
            "law cache n_max = {} below the profile's largest size {}",
            law.n_max(),
            profile.max_n()
        )));
    }
    let quick = profile == SuiteProfile::Quick;
    let pick = |q: usize, r: usize| if quick { q } else { r };
    let sizes = |q: &[usize], r: &[usize]| if quick { q.to_vec() } else { r.to_vec() };
    let model = |spec: CovarianceSpec| Model::new(law.clone(), spec);
    let [iid, expd, power] = families();
    let mut out = Vec::new();
    let mut stage = 0u64;
    let mut next_seed = || {
        stage += 1;
        crate::rng::child_seed(seed, stage)
    };

    out.push(check_comparison_lemma(
        &model(expd.clone()),
        &ComparisonParams { h: 1.0, n: 10, r: 3, replicas: pick(20_000, 1_000_000), seed: next_seed() },
    )?);
    out.push(check_endpoint_decay(
        &model(iid.clone()),
        &EndpointParams {
            h: 2.0,
            n_list: sizes(&[16, 32, 64, 128], &[64, 128, 256, 512]),
            replicas: pick(100, 500),
            seed: next_seed(),
        },
    )?);
    let mut eps_exp = None;
    for spec in [iid.clone(), expd.clone(), power.clone()] {
        let is_exp = spec == expd;
        let r = check_gibbs_decay(
            &model(spec),
            &GibbsParams {
                h: 1.5,
                n: pick(128, 512),
                replicas: pick(20, 200),
                max_lag: pick(20, 40),
                seed: next_seed(),
            },
        )?;
        if is_exp {
            eps_exp = eps_hat_of(&r);
        }
        out.push(r);
    }
    out.push(check_replica_decoupling(
        &model(iid.clone()),
        &DecouplingParams {
            h: 1.5,
            n_list: sizes(&[8, 16, 32, 64], &[32, 64, 128, 256]),
            replicas: pick(10, 50),
            paths_per_replica: pick(4, 10),
            seed: next_seed(),
        },
    )?);
    for spec in [iid.clone(), expd.clone()] {
        out.push(check_largest_gap(
            &model(spec),
            &GapParams {
                h: 1.5,
                n_list: sizes(&[512, 1024, 2048], &[1024, 2048, 4096, 8192]),
                replicas: pick(20, 50),
                paths: pick(50, 200),
                mu_replicas: pick(100, 200),
                seed: next_seed(),
            },
        )?);
    }
    for spec in [iid.clone(), expd.clone()] {
        out.push(check_clt(
            &model(spec),
            &CltParams {
                h: 1.5,
                n: pick(1024, 4096),
                omega_replicas: pick(4, 10),
                paths_per_omega: pick(2000, 10_000),
                seed: next_seed(),
            },
        )?);
    }
    for spec in [iid.clone(), expd.clone(), power.clone()] {
        out.push(check_concentration(
            &model(spec),
            &ConcentrationParams { h: 1.0, n: pick(64, 256), replicas: pick(2000, 10_000), seed: next_seed() },
        )?);
    }
    out.push(check_mu_sandwich(
        &model(iid.clone()),
        &SandwichParams {
            h_grid: vec![0.5, 1.0, 1.5, 2.0],
            n: pick(128, 1024),
            replicas: pick(100, 200),
            lipschitz_step: 0.2,
            seed: next_seed(),
        },
    )?);
    for spec in [iid.clone(), expd.clone()] {
        out.push(check_hypercontractivity(
            &spec,
            &HypercontractivityParams { n: 64, block_count: 4, replicas: pick(20_000, 1_000_000), seed: next_seed() },
        )?);
    }
    out.push(check_convolution_decay(&ConvolutionParams { eps: 0.5, a: 0.5, a_prime: 0.4, k_max: 10_000 })?);
    out.push(check_centering_variance(
        &model(expd),
        &CenteringParams {
            h: 1.5,
            n: pick(64, 512),
            replicas: pick(100, 400),
            eps_hat: eps_exp.filter(|e| *e > 0.0).unwrap_or(0.5),
            seed: next_seed(),
        },
    )?);
    Ok(out)
}
