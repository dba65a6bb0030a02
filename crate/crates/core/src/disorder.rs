//! Stationary Gaussian disorder: covariance families, positivity
//! certificates, the finite-range truncation, and exact samplers.

use std::io::{self, Read, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream_rng, Lane};

/// Number of grid points for the symbol positivity certificate.
pub const SYMBOL_GRID: usize = 4096;
/// Largest size for which `spectral_bounds` runs a dense eigensolve.
pub const DENSE_SPECTRUM_LIMIT: usize = 512;
/// Largest size for the dense Cholesky sampling route.
pub const CHOLESKY_LIMIT: usize = 8192;
/// Circulant eigenvalues in `[-CLIP_TOLERANCE * gamma_0, 0)` are clipped to 0.
pub const CLIP_TOLERANCE: f64 = 1e-12;

const POWER_LAW_FOLD_TERMS: usize = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisorderError {
    #[error("covariance of size {n} is not positive definite")]
    NotPositiveDefinite { n: usize },
    #[error("circulant embedding of size {m} has eigenvalue {min_eigenvalue:e} < 0")]
    EmbeddingNotNonnegative { m: usize, min_eigenvalue: f64 },
    #[error("samples have mismatched lengths ({expected} vs {found})")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid covariance parameters: {0}")]
    InvalidParameter(String),
    #[error("bad disorder dump: {0}")]
    BadDump(String),
}

/// Covariance family `gamma_k = Cov(omega_i, omega_{i+k})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CovarianceFamily {
    Iid { variance: f64 },
    FiniteRange { gammas: Vec<f64> },
    /// `gamma_k = gamma0 * rho^k`
    ExpDecay { gamma0: f64, rho: f64 },
    /// `gamma_k = c * k^(-1-a)` for `k >= 1`, free `gamma0`
    PowerLaw { gamma0: f64, c: f64, a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    #[serde(flatten)]
    pub family: CovarianceFamily,
    pub label: String,
}

/// Outcome of the Toeplitz symbol scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymbolCertificate {
    pub grid_min: f64,
    pub grid_max: f64,
    /// Bound on the neglected part of the symbol series.
    pub truncation_bound: f64,
}

impl SymbolCertificate {
    pub fn positive_semidefinite(&self) -> bool {
        self.grid_min + self.truncation_bound >= 0.0
    }

    pub fn positive_definite(&self) -> bool {
        self.grid_min - self.truncation_bound > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpectrumMethod {
    Exact,
    Dense,
    Symbol,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub method: SpectrumMethod,
}

impl SpectralBounds {
    /// `eta = 1 / lambda_min`.
    pub fn eta(&self) -> f64 {
        1.0 / self.lambda_min
    }
}

impl CovarianceSpec {
    pub fn new(family: CovarianceFamily, label: impl Into<String>) -> Result<Self, DisorderError> {
        let spec = Self { family, label: label.into() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn iid(variance: f64) -> Self {
        Self { family: CovarianceFamily::Iid { variance }, label: format!("iid({variance})") }
    }

    pub fn exp_decay(gamma0: f64, rho: f64) -> Self {
        Self {
            family: CovarianceFamily::ExpDecay { gamma0, rho },
            label: format!("exp({gamma0},{rho})"),
        }
    }

    pub fn power_law(gamma0: f64, c: f64, a: f64) -> Self {
        Self {
            family: CovarianceFamily::PowerLaw { gamma0, c, a },
            label: format!("power({gamma0},{c},{a})"),
        }
    }

    pub fn finite_range(gammas: Vec<f64>) -> Self {
        let label = format!("finite(r={})", gammas.len().saturating_sub(1));
        Self { family: CovarianceFamily::FiniteRange { gammas }, label }
    }

    pub fn validate(&self) -> Result<(), DisorderError> {
        let bad = |m: &str| Err(DisorderError::InvalidParameter(m.to_string()));
        match &self.family {
            CovarianceFamily::Iid { variance } if !(*variance >= 0.0) => bad("variance must be >= 0"),
            CovarianceFamily::FiniteRange { gammas } if gammas.is_empty() => {
                bad("finite range needs gamma_0")
            }
            CovarianceFamily::FiniteRange { gammas }
                if gammas.iter().any(|g| !g.is_finite()) || !(gammas[0] >= 0.0) =>
            {
                bad("finite range entries must be finite with gamma_0 >= 0")
            }
            CovarianceFamily::ExpDecay { gamma0, rho } if !(*gamma0 >= 0.0) || !(rho.abs() < 1.0) => {
                bad("exp decay needs gamma0 >= 0 and |rho| < 1")
            }
            CovarianceFamily::PowerLaw { gamma0, c, a }
                if !(*gamma0 >= 0.0) || !c.is_finite() || !(*a > 0.0) =>
            {
                bad("power law needs gamma0 >= 0 and a > 0")
            }
            _ => Ok(()),
        }
    }

    /// `gamma_k`.
    pub fn gamma(&self, k: usize) -> f64 {
        match &self.family {
            CovarianceFamily::Iid { variance } => {
                if k == 0 {
                    *variance
                } else {
                    0.0
                }
            }
            CovarianceFamily::FiniteRange { gammas } => gammas.get(k).copied().unwrap_or(0.0),
            CovarianceFamily::ExpDecay { gamma0, rho } => gamma0 * rho.powi(k as i32),
            CovarianceFamily::PowerLaw { gamma0, c, a } => {
                if k == 0 {
                    *gamma0
                } else {
                    c * (k as f64).powf(-1.0 - a)
                }
            }
        }
    }

    /// `sum_{k >= 0} |gamma_k|` in closed form.
    pub fn gamma_bar(&self) -> f64 {
        match &self.family {
            CovarianceFamily::Iid { variance } => *variance,
            CovarianceFamily::FiniteRange { gammas } => gammas.iter().map(|g| g.abs()).sum(),
            CovarianceFamily::ExpDecay { gamma0, rho } => gamma0 / (1.0 - rho.abs()),
            CovarianceFamily::PowerLaw { gamma0, c, a } => gamma0 + c.abs() * hurwitz_zeta(1.0 + a, 1.0),
        }
    }

    /// `sum_{k > r} |gamma_k|`.
    pub fn tail_abs_sum(&self, r: usize) -> f64 {
        match &self.family {
            CovarianceFamily::Iid { .. } => 0.0,
            CovarianceFamily::FiniteRange { gammas } => {
                gammas.iter().skip(r + 1).map(|g| g.abs()).sum()
            }
            CovarianceFamily::ExpDecay { gamma0, rho } => {
                gamma0 * rho.abs().powi(r as i32 + 1) / (1.0 - rho.abs())
            }
            CovarianceFamily::PowerLaw { c, a, .. } => {
                c.abs() * hurwitz_zeta(1.0 + a, (r + 1) as f64)
            }
        }
    }

    /// `sum_{k=0}^{n-1} |gamma_k|`.
    pub fn gamma_bar_n(&self, n: usize) -> f64 {
        match &self.family {
            CovarianceFamily::Iid { variance } => *variance,
            CovarianceFamily::ExpDecay { gamma0, rho } => {
                gamma0 * (1.0 - rho.abs().powi(n as i32)) / (1.0 - rho.abs())
            }
            _ => (0..n).rev().map(|k| self.gamma(k).abs()).sum(),
        }
    }

    /// Largest lag with a nonzero entry, if finite.
    pub fn range(&self) -> Option<usize> {
        match &self.family {
            CovarianceFamily::Iid { .. } => Some(0),
            CovarianceFamily::FiniteRange { gammas } => {
                Some(gammas.iter().rposition(|g| *g != 0.0).unwrap_or(0))
            }
            CovarianceFamily::ExpDecay { rho, .. } if *rho == 0.0 => Some(0),
            CovarianceFamily::PowerLaw { c, .. } if *c == 0.0 => Some(0),
            _ => None,
        }
    }

    /// Finite-range comparison field: lags `1..=r` are kept, the dropped
    /// absolute mass is added twice to the diagonal, which keeps every
    /// Toeplitz section positive definite.
    pub fn truncate(&self, r: usize) -> CovarianceSpec {
        let r = r.max(1);
        if let Some(range) = self.range() {
            if range <= r {
                return self.clone();
            }
        }
        let mut gammas: Vec<f64> = (0..=r).map(|k| self.gamma(k)).collect();
        gammas[0] += 2.0 * self.tail_abs_sum(r);
        CovarianceSpec {
            family: CovarianceFamily::FiniteRange { gammas },
            label: format!("{}|trunc{}", self.label, r),
        }
    }

    /// `g(theta) = gamma_0 + 2 sum_{k>=1} gamma_k cos(k theta)`.
    pub fn symbol(&self, theta: f64) -> f64 {
        match &self.family {
            CovarianceFamily::Iid { variance } => *variance,
            CovarianceFamily::FiniteRange { gammas } => {
                gammas[0]
                    + 2.0
                        * gammas
                            .iter()
                            .enumerate()
                            .skip(1)
                            .map(|(k, g)| g * (k as f64 * theta).cos())
                            .sum::<f64>()
            }
            CovarianceFamily::ExpDecay { gamma0, rho } => {
                gamma0 * (1.0 - rho * rho) / (1.0 - 2.0 * rho * theta.cos() + rho * rho)
            }
            CovarianceFamily::PowerLaw { gamma0, c, a } => {
                let terms = 200_000usize;
                let s: f64 = (1..=terms)
                    .rev()
                    .map(|k| (k as f64).powf(-1.0 - a) * (k as f64 * theta).cos())
                    .sum();
                gamma0 + 2.0 * c * s
            }
        }
    }

    /// Scans the symbol on `SYMBOL_GRID` equispaced angles.
    pub fn symbol_certificate(&self) -> SymbolCertificate {
        let values = self.symbol_grid(SYMBOL_GRID);
        let (grid_min, grid_max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let truncation_bound = match &self.family {
            CovarianceFamily::PowerLaw { c, a, .. } => {
                2.0 * c.abs() * hurwitz_zeta(1.0 + a, (POWER_LAW_FOLD_TERMS + 1) as f64)
            }
            _ => 0.0,
        };
        SymbolCertificate { grid_min, grid_max, truncation_bound }
    }

    /// Symbol values at `theta_j = 2 pi j / points`.
    pub fn symbol_grid(&self, points: usize) -> Vec<f64> {
        let two_pi = 2.0 * std::f64::consts::PI;
        match &self.family {
            CovarianceFamily::PowerLaw { gamma0, .. } => {
                // fold lags modulo the grid, then one FFT
                let mut folded = vec![Complex::new(0.0, 0.0); points];
                for k in (1..=POWER_LAW_FOLD_TERMS).rev() {
                    folded[k % points].re += self.gamma(k);
                }
                let fft = FftPlanner::new().plan_fft_forward(points);
                fft.process(&mut folded);
                folded.iter().map(|z| gamma0 + 2.0 * z.re).collect()
            }
            _ => (0..points).map(|j| self.symbol(two_pi * j as f64 / points as f64)).collect(),
        }
    }

    /// Dense `n x n` Toeplitz section.
    pub fn toeplitz(&self, n: usize) -> DMatrix<f64> {
        let col: Vec<f64> = (0..n).map(|k| self.gamma(k)).collect();
        DMatrix::from_fn(n, n, |i, j| col[i.abs_diff(j)])
    }

    /// Spectrum enclosure for the `n x n` section. Dense eigensolve for
    /// `n <= DENSE_SPECTRUM_LIMIT`, symbol range otherwise.
    pub fn spectral_bounds(&self, n: usize) -> Result<SpectralBounds, DisorderError> {
        if let CovarianceFamily::Iid { variance } = self.family {
            if variance <= 0.0 {
                return Err(DisorderError::NotPositiveDefinite { n });
            }
            return Ok(SpectralBounds {
                lambda_min: variance,
                lambda_max: variance,
                method: SpectrumMethod::Exact,
            });
        }
        let gershgorin = 2.0 * self.gamma_bar_n(n);
        if n <= DENSE_SPECTRUM_LIMIT {
            let m = self.toeplitz(n);
            if m.clone().cholesky().is_none() {
                return Err(DisorderError::NotPositiveDefinite { n });
            }
            let eig = SymmetricEigen::new(m);
            let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            return Ok(SpectralBounds {
                lambda_min: lo,
                lambda_max: hi.min(gershgorin),
                method: SpectrumMethod::Dense,
            });
        }
        let cert = self.symbol_certificate();
        Ok(SpectralBounds {
            lambda_min: cert.grid_min - cert.truncation_bound,
            lambda_max: (cert.grid_max + cert.truncation_bound).min(gershgorin),
            method: SpectrumMethod::Symbol,
        })
    }
}

/// `zeta(s, q) = sum_{k >= 0} (k + q)^(-s)` for `s > 1`, `q > 0`, via
/// Euler-Maclaurin with 24 explicit terms.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    const N: usize = 24;
    // B_{2j} / (2j)!
    const COEFFS: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let head: f64 = (0..N).rev().map(|k| (k as f64 + q).powf(-s)).sum();
    let x = N as f64 + q;
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2)
    let mut rising = s;
    let mut power = x.powf(-s - 1.0);
    for (j, c) in COEFFS.iter().enumerate() {
        tail += c * rising * power;
        let a = s + (2 * j + 1) as f64;
        rising *= a * (a + 1.0);
        power /= x * x;
    }
    head + tail
}

/// One disorder realization `omega_1..omega_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub spec_label: String,
}

impl DisorderSample {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n], seed: 0, stream: 0, spec_label: "zero".into() }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values, seed: 0, stream: 0, spec_label: "given".into() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `omega_i`, 1-based.
    pub fn omega(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    /// The shifted environment `omega_{offset+1}, ...` as a view.
    pub fn shifted(&self, offset: usize) -> &[f64] {
        &self.values[offset..]
    }

    pub fn prefix(&self, n: usize) -> DisorderSample {
        DisorderSample { values: self.values[..n].to_vec(), ..self.clone() }
    }

    const MAGIC: [u8; 8] = *b"PINLABW1";

    /// Little-endian dump: 8-byte magic, `n` as u64, then `n` f64 values.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&Self::MAGIC)?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Vec<f64>, DisorderError> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header).map_err(|e| DisorderError::BadDump(e.to_string()))?;
        if header[..8] != Self::MAGIC {
            return Err(DisorderError::BadDump("magic mismatch".into()));
        }
        let n = u64::from_le_bytes(header[8..].try_into().unwrap()) as usize;
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf).map_err(|e| DisorderError::BadDump(e.to_string()))?;
        Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SamplingRoute {
    Independent,
    Circulant { embedding: usize },
    Cholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoutePreference {
    Auto,
    ForceCholesky,
}

enum Engine {
    Independent { sd: f64 },
    Circulant { m: usize, scale: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Cholesky { lower: Vec<f64> },
}

/// Reusable exact sampler for `N(0, Gamma_n)`.
pub struct DisorderSampler {
    spec: CovarianceSpec,
    n: usize,
    engine: Engine,
    route: SamplingRoute,
    fallback: Option<String>,
}

impl std::fmt::Debug for DisorderSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DisorderSampler")
            .field("spec", &self.spec.label)
            .field("n", &self.n)
            .field("route", &self.route)
            .field("fallback", &self.fallback)
            .finish()
    }
}

impl DisorderSampler {
    pub fn new(spec: &CovarianceSpec, n: usize) -> Result<Self, DisorderError> {
        Self::with_preference(spec, n, RoutePreference::Auto)
    }

    pub fn with_preference(
        spec: &CovarianceSpec,
        n: usize,
        preference: RoutePreference,
    ) -> Result<Self, DisorderError> {
        spec.validate()?;
        let make = |engine, route, fallback| DisorderSampler {
            spec: spec.clone(),
            n,
            engine,
            route,
            fallback,
        };
        if preference == RoutePreference::Auto {
            if let CovarianceFamily::Iid { variance } = spec.family {
                return Ok(make(
                    Engine::Independent { sd: variance.sqrt() },
                    SamplingRoute::Independent,
                    None,
                ));
            }
            match circulant_engine(spec, n) {
                Ok((engine, m)) => {
                    return Ok(make(engine, SamplingRoute::Circulant { embedding: m }, None))
                }
                Err(e @ DisorderError::EmbeddingNotNonnegative { .. }) => {
                    let engine = cholesky_engine(spec, n)?;
                    return Ok(make(engine, SamplingRoute::Cholesky, Some(e.to_string())));
                }
                Err(e) => return Err(e),
            }
        }
        let engine = cholesky_engine(spec, n)?;
        Ok(make(engine, SamplingRoute::Cholesky, None))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &CovarianceSpec {
        &self.spec
    }

    pub fn route(&self) -> SamplingRoute {
        self.route
    }

    /// Set when the circulant route was rejected and Cholesky used instead.
    pub fn fallback(&self) -> Option<&str> {
        self.fallback.as_deref()
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.n);
        match &self.engine {
            Engine::Independent { sd } => {
                for v in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = sd * z;
                }
            }
            Engine::Circulant { m, scale, fft } => {
                let mut buf: Vec<Complex<f64>> = scale
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                debug_assert_eq!(buf.len(), *m);
                fft.process(&mut buf);
                for (v, z) in out.iter_mut().zip(&buf) {
                    *v = z.re;
                }
            }
            Engine::Cholesky { lower } => {
                let n = self.n;
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..n {
                    let row = &lower[i * n..i * n + i + 1];
                    out[i] = row.iter().zip(&z).map(|(l, z)| l * z).sum();
                }
            }
        }
    }

    /// Replica `stream` under `seed`; bit-identical for identical inputs.
    pub fn sample(&self, seed: u64, stream: u64) -> DisorderSample {
        let mut rng = stream_rng(seed, Lane::Disorder, stream);
        let mut values = vec![0.0; self.n];
        self.fill(&mut rng, &mut values);
        DisorderSample { values, seed, stream, spec_label: self.spec.label.clone() }
    }
}

fn circulant_engine(spec: &CovarianceSpec, n: usize) -> Result<(Engine, usize), DisorderError> {
    let m = (2 * n).next_power_of_two().max(2);
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|k| Complex::new(spec.gamma(k.min(m - k)), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut row);
    let gamma0 = spec.gamma(0).abs().max(f64::MIN_POSITIVE);
    let min_eigenvalue = row.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if min_eigenvalue < -CLIP_TOLERANCE * gamma0 {
        return Err(DisorderError::EmbeddingNotNonnegative { m, min_eigenvalue });
    }
    let scale = row.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect();
    let fft = planner.plan_fft_forward(m);
    Ok((Engine::Circulant { m, scale, fft }, m))
}

fn cholesky_engine(spec: &CovarianceSpec, n: usize) -> Result<Engine, DisorderError> {
    if n > CHOLESKY_LIMIT {
        return Err(DisorderError::NotPositiveDefinite { n });
    }
    let chol = spec
        .toeplitz(n)
        .cholesky()
        .ok_or(DisorderError::NotPositiveDefinite { n })?;
    let l = chol.l();
    let mut lower = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            lower[i * n + j] = l[(i, j)];
        }
    }
    Ok(Engine::Cholesky { lower })
}

/// One-shot draw of `omega ~ N(0, Gamma_n)`.
pub fn sample(spec: &CovarianceSpec, n: usize, seed: u64) -> Result<DisorderSample, DisorderError> {
    Ok(DisorderSampler::new(spec, n)?.sample(seed, 0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCovariance {
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// Lag-`k` products averaged over positions, then over replicas. Standard
/// errors come from the spread of the per-replica averages (NaN for a single
/// replica).
pub fn empirical_covariance(
    samples: &[DisorderSample],
    k_max: usize,
) -> Result<EmpiricalCovariance, DisorderError> {
    let n = samples.first().map(|s| s.len()).unwrap_or(0);
    if n < k_max + 1 {
        return Err(DisorderError::LengthMismatch { expected: k_max + 1, found: n });
    }
    if let Some(bad) = samples.iter().find(|s| s.len() != n) {
        return Err(DisorderError::LengthMismatch { expected: n, found: bad.len() });
    }
    let reps = samples.len() as f64;
    let mut estimates = Vec::with_capacity(k_max + 1);
    let mut std_errors = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let per: Vec<f64> = samples
            .iter()
            .map(|s| {
                let v = &s.values;
                v[..n - k].iter().zip(&v[k..]).map(|(a, b)| a * b).sum::<f64>() / (n - k) as f64
            })
            .collect();
        let mean = per.iter().sum::<f64>() / reps;
        let var = per.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1.0);
        estimates.push(mean);
        std_errors.push(if samples.len() > 1 { (var / reps).sqrt() } else { f64::NAN });
    }
    Ok(EmpiricalCovariance { estimates, std_errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_formulas() {
        let iid = CovarianceSpec::iid(1.0);
        assert_eq!(iid.gamma(0), 1.0);
        assert_eq!(iid.gamma(5), 0.0);
        assert_eq!(CovarianceSpec::exp_decay(1.0, 0.5).gamma(3), 0.125);
        assert_relative_eq!(CovarianceSpec::power_law(1.0, 0.2, 0.5).gamma(4), 0.025, max_relative = 1e-15);
    }

    #[test]
    fn partial_sums() {
        assert_eq!(CovarianceSpec::iid(1.0).gamma_bar_n(17), 1.0);
        assert_relative_eq!(CovarianceSpec::exp_decay(1.0, 0.5).gamma_bar_n(3), 1.75, max_relative = 1e-15);
        let p = CovarianceSpec::power_law(1.0, 0.2, 0.5);
        let direct: f64 = 1.0 + (1..1_000_000usize).rev().map(|k| 0.2 * (k as f64).powf(-1.5)).sum::<f64>();
        assert_relative_eq!(p.gamma_bar_n(1_000_000), direct, max_relative = 1e-12);
        // remaining tail ~ 0.2 * 2 / sqrt(1e6)
        let closed = p.gamma_bar();
        assert!(closed > direct);
        assert_relative_eq!(closed - direct, 0.2 * hurwitz_zeta(1.5, 1e6), max_relative = 1e-6);
        assert!(((closed - direct) / closed) < 3e-4);
    }

    #[test]
    fn hurwitz_zeta_known_values() {
        assert_relative_eq!(hurwitz_zeta(2.0, 1.0), std::f64::consts::PI.powi(2) / 6.0, max_relative = 1e-14);
        assert_relative_eq!(hurwitz_zeta(1.5, 1.0), 2.612_375_348_685_488, max_relative = 1e-13);
        assert_relative_eq!(hurwitz_zeta(2.0, 3.0), std::f64::consts::PI.powi(2) / 6.0 - 1.25, max_relative = 1e-13);
    }

    #[test]
    fn truncation_exp_decay_r2() {
        let t = CovarianceSpec::exp_decay(1.0, 0.5).truncate(2);
        assert_eq!(t.gamma(0), 1.5);
        assert_eq!(t.gamma(1), 0.5);
        assert_eq!(t.gamma(2), 0.25);
        assert_eq!(t.gamma(3), 0.0);
        assert_eq!(t.gamma(50), 0.0);
    }

    #[test]
    fn truncation_keeps_iid_and_is_idempotent() {
        let iid = CovarianceSpec::iid(1.0);
        assert_eq!(iid.truncate(4), iid);
        let f = CovarianceSpec::finite_range(vec![2.0, 0.5, -0.3]);
        assert_eq!(f.truncate(2), f);
        assert_eq!(f.truncate(5), f);
        let t = CovarianceSpec::exp_decay(1.0, 0.5).truncate(3);
        assert_eq!(t.truncate(3), t);
    }

    #[test]
    fn truncation_raises_smallest_eigenvalue() {
        for spec in [CovarianceSpec::exp_decay(1.0, 0.5), CovarianceSpec::power_law(1.0, 0.2, 0.5)] {
            for &r in &[1usize, 2, 5] {
                let t = spec.truncate(r);
                for &n in &[4usize, 16, 64] {
                    let lo = spec.spectral_bounds(n).unwrap().lambda_min;
                    let lt = t.spectral_bounds(n).unwrap().lambda_min;
                    assert!(lo > 0.0);
                    assert!(lt >= lo - 1e-12, "{} r={r} n={n}: {lt} < {lo}", spec.label);
                }
            }
        }
    }

    #[test]
    fn spectral_bounds_cases() {
        let b = CovarianceSpec::iid(2.5).spectral_bounds(100).unwrap();
        assert_eq!((b.lambda_min, b.lambda_max), (2.5, 2.5));
        let e = CovarianceSpec::exp_decay(1.0, 0.5);
        let b = e.spectral_bounds(64).unwrap();
        assert!(b.lambda_max <= 4.0);
        assert!(b.lambda_min >= 1.0 / 3.0 - 1e-12);
        // large n falls back to the symbol range
        let big = e.spectral_bounds(5000).unwrap();
        assert_eq!(big.method, SpectrumMethod::Symbol);
        assert_relative_eq!(big.lambda_min, 1.0 / 3.0, max_relative = 1e-9);
        let bad = CovarianceSpec::finite_range(vec![1.0, 0.9]);
        assert!(matches!(bad.spectral_bounds(8), Err(DisorderError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn gershgorin_bound_holds_for_all_families() {
        let specs = [
            CovarianceSpec::iid(1.3),
            CovarianceSpec::exp_decay(1.0, -0.6),
            CovarianceSpec::power_law(1.0, 0.2, 0.5),
            CovarianceSpec::finite_range(vec![1.0, 0.3, 0.1]),
        ];
        for s in &specs {
            for &n in &[1usize, 7, 64] {
                let eig = SymmetricEigen::new(s.toeplitz(n));
                let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert!(hi <= 2.0 * s.gamma_bar() + 1e-12);
            }
        }
    }

    #[test]
    fn poisson_kernel_symbol() {
        let rho: f64 = 0.5;
        let s = CovarianceSpec::exp_decay(1.0, rho);
        let grid = s.symbol_grid(256);
        let min = grid.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(min, (1.0 - rho) / (1.0 + rho), max_relative = 1e-12);
        // closed form against the truncated cosine series
        for &theta in &[0.1, 1.0, 2.5] {
            let series = 1.0 + 2.0 * (1..200).map(|k| rho.powi(k) * (k as f64 * theta).cos()).sum::<f64>();
            assert_relative_eq!(s.symbol(theta), series, max_relative = 1e-12);
        }
        assert!(s.symbol_certificate().positive_definite());
    }

    #[test]
    fn power_law_symbol_fold_matches_direct() {
        let s = CovarianceSpec::power_law(1.0, 0.2, 0.5);
        let grid = s.symbol_grid(64);
        for j in [0usize, 5, 32] {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / 64.0;
            // direct 200k-term sum has tail ~ 2*0.2*2/sqrt(2e5) ~ 2e-3
            assert!((grid[j] - s.symbol(theta)).abs() < 3e-3);
        }
        let cert = s.symbol_certificate();
        assert!(cert.positive_definite());
        // min at theta = pi: 1 - 2*0.2*(1 - 2^{-1/2}) zeta(3/2)
        let expected = 1.0 - 0.4 * (1.0 - 0.5f64.sqrt()) * hurwitz_zeta(1.5, 1.0);
        assert!((cert.grid_min - expected).abs() < 2.0 * cert.truncation_bound + 1e-9);
    }

    #[test]
    fn sampling_is_deterministic() {
        for spec in [CovarianceSpec::iid(1.0), CovarianceSpec::exp_decay(1.0, 0.5)] {
            let a = sample(&spec, 100, 42).unwrap();
            let b = sample(&spec, 100, 42).unwrap();
            let c = sample(&spec, 100, 43).unwrap();
            assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                       b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            assert_ne!(a.values, c.values);
        }
    }

    #[test]
    fn embedding_rejection_falls_back() {
        // positive symbol, but with n = 3 the period-8 embedding keeps lag 4 once and goes negative
        let spec = CovarianceSpec::finite_range(vec![1.0, 0.08, -0.43, 0.12, 0.25]);
        assert!(spec.symbol_certificate().grid_min > 0.1);
        let sampler = DisorderSampler::new(&spec, 3).unwrap();
        assert_eq!(sampler.route(), SamplingRoute::Cholesky);
        assert!(sampler.fallback().unwrap().contains("embedding"));
        // a longer system embeds without trouble
        let wide = DisorderSampler::new(&spec, 64).unwrap();
        assert!(matches!(wide.route(), SamplingRoute::Circulant { embedding: 128 }));
        assert!(wide.fallback().is_none());

        let not_pd = CovarianceSpec::finite_range(vec![1.0, 0.8, 0.8]);
        assert!(DisorderSampler::new(&not_pd, 4).is_err());
    }

    #[test]
    fn forced_cholesky_has_no_fallback_note() {
        let spec = CovarianceSpec::exp_decay(1.0, 0.5);
        let s = DisorderSampler::with_preference(&spec, 16, RoutePreference::ForceCholesky).unwrap();
        assert_eq!(s.route(), SamplingRoute::Cholesky);
        assert!(s.fallback().is_none());
    }

    #[test]
    fn empirical_covariance_constant_field() {
        let s = DisorderSample::from_values(vec![1.5; 10]);
        let est = empirical_covariance(&[s.clone(), s], 3).unwrap();
        for k in 0..=3 {
            assert_eq!(est.estimates[k], 2.25);
            assert_eq!(est.std_errors[k], 0.0);
        }
        let short = DisorderSample::from_values(vec![0.0; 2]);
        assert!(empirical_covariance(&[short], 3).is_err());
    }

    #[test]
    fn binary_dump_round_trip() {
        let s = sample(&CovarianceSpec::exp_decay(1.0, 0.5), 33, 9).unwrap();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 33 * 8);
        assert_eq!(&buf[..8], b"PINLABW1");
        assert_eq!(DisorderSample::read_binary(&buf[..]).unwrap(), s.values);
        assert!(DisorderSample::read_binary(&b"garbage_garbage_"[..]).is_err());
    }
}
