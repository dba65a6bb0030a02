//! Three entry points for the static page in `www/`: a free-energy curve
//! against the homogeneous one, the contact profile of one disorder draw with
//! a sampled path, and raw disorder samples.

use pinlab_core::disorder::{CovarianceSpec, DisorderSampler};
use pinlab_core::estimators::{free_energy, Model};
use pinlab_core::polymer::PolymerWorkspace;
use pinlab_core::renewal::{InterArrivalLaw, SlowlyVarying};
use wasm_bindgen::prelude::*;

const HORIZON: usize = 10_000_000;
const MAX_N: usize = 2048;

fn law(alpha: f64, n: usize) -> Result<InterArrivalLaw, JsError> {
    if n == 0 || n > MAX_N {
        return Err(JsError::new(&format!("n must be in 1..={MAX_N}")));
    }
    InterArrivalLaw::new(alpha, SlowlyVarying::Constant { c: 1.0 }, HORIZON, n).map_err(|e| JsError::new(&e.to_string()))
}

/// `family` is one of `iid`, `exp`, `power`; `strength` is the
/// correlation parameter (`rho` for exp, `c` for power, unused for iid).
fn spec(family: &str, strength: f64) -> Result<CovarianceSpec, JsError> {
    let s = match family {
        "iid" => CovarianceSpec::iid(1.0),
        "exp" => CovarianceSpec::exp_decay(1.0, strength),
        "power" => CovarianceSpec::power_law(1.0, strength, 0.5),
        other => return Err(JsError::new(&format!("unknown family `{other}`"))),
    };
    s.validate().map_err(|e| JsError::new(&e.to_string()))?;
    Ok(s)
}

/// Rows of `[h, f_hat, std_error, f_pure]`, flattened.
#[wasm_bindgen]
pub fn free_energy_curve(
    alpha: f64,
    family: &str,
    strength: f64,
    n: usize,
    replicas: usize,
    h_min: f64,
    h_max: f64,
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let law = law(alpha, n)?;
    let model = Model::new(law.clone(), spec(family, strength)?);
    let steps = steps.max(2);
    let mut out = Vec::with_capacity(4 * steps);
    for k in 0..steps {
        let h = h_min + (h_max - h_min) * k as f64 / (steps - 1) as f64;
        let f = free_energy(&model, h, n, replicas.max(2), seed).map_err(|e| JsError::new(&e.to_string()))?;
        let pure = law.pure_free_energy(h).map_err(|e| JsError::new(&e.to_string()))?;
        out.extend([h, f.mean.point, f.mean.std_error, pure]);
    }
    Ok(out)
}

/// `[omega_1..n, marginal_1..n, path indicator_1..n]`, flattened: one
/// disorder draw, its exact contact marginals and one sampled path.
#[wasm_bindgen]
pub fn contact_profile(alpha: f64, family: &str, strength: f64, n: usize, h: f64, seed: u64) -> Result<Vec<f64>, JsError> {
    let law = law(alpha, n)?;
    let sampler = DisorderSampler::new(&spec(family, strength)?, n).map_err(|e| JsError::new(&e.to_string()))?;
    let omega = sampler.sample(seed, 0).values;
    let ws = PolymerWorkspace::build(&law, &omega, h, 1).map_err(|e| JsError::new(&e.to_string()))?;
    let path = ws.sample_path_seeded(seed, 0).map_err(|e| JsError::new(&e.to_string()))?;
    let mut hit = vec![0.0; n];
    for &i in &path.renewal_points {
        hit[i - 1] = 1.0;
    }
    let mut out = omega;
    out.extend(ws.contact_marginals());
    out.extend(hit);
    Ok(out)
}

/// `count` disorder samples of length `n`, concatenated.
#[wasm_bindgen]
pub fn disorder_samples(family: &str, strength: f64, n: usize, count: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    let sampler = DisorderSampler::new(&spec(family, strength)?, n).map_err(|e| JsError::new(&e.to_string()))?;
    Ok((0..count as u64).flat_map(|k| sampler.sample(seed, k).values).collect())
}

/// How the sampler would draw `n` values: `independent`, `circulant`
/// or `cholesky`, with the fallback reason when there is one.
#[wasm_bindgen]
pub fn sampling_route(family: &str, strength: f64, n: usize) -> Result<String, JsError> {
    let sampler = DisorderSampler::new(&spec(family, strength)?, n).map_err(|e| JsError::new(&e.to_string()))?;
    let mut s = format!("{:?}", sampler.route()).to_lowercase();
    if let Some(why) = sampler.fallback() {
        s.push_str(&format!(" ({why})"));
    }
    Ok(s)
}
