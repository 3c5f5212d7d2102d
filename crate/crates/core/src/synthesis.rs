//! Exact Gaussian synthesis of OFBM paths.
//!
//! Pre-mix increments are a stationary multivariate fGn. Its autocovariance
//! sequence is embedded in a block circulant of power-of-two length `M`,
//! whose Fourier symbol is a real symmetric `n×n` matrix at every frequency
//! (time reversibility makes every lag block symmetric and even in the lag).
//! A Hermitian-symmetric complex Gaussian field shaped by the symbol factors
//! is inverse transformed; its first `ν-1` samples have exactly the target law.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::model::{exact_path_covariance, for_each_spectral_eigen, OfbmSpec, PathMeta, SamplePath};
use crate::rng::rng_from_seed;

/// Number of times the embedding length is doubled on inadmissibility.
const MAX_EMBED_DOUBLINGS: u32 = 3;

/// Largest path length accepted by [`cholesky_oracle`].
pub const ORACLE_MAX_NU: usize = 1024;

/// Precomputed circulant-embedding factors, reusable across replications.
#[derive(Clone)]
pub struct SynthesisPlan {
    spec: OfbmSpec,
    nu: usize,
    embed_len: usize,
    /// `A(f) = Q(f) diag(√λ(f))`, column-major, for `f = 0..=embed_len/2`.
    factors: Vec<f64>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SynthesisPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SynthesisPlan")
            .field("n", &self.spec.n())
            .field("nu", &self.nu)
            .field("embed_len", &self.embed_len)
            .finish()
    }
}

impl SynthesisPlan {
    pub fn spec(&self) -> &OfbmSpec {
        &self.spec
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn embed_len(&self) -> usize {
        self.embed_len
    }

    pub fn spectral_factors(&self) -> &[f64] {
        &self.factors
    }
}

/// Smallest power of two `>= 2(ν-1)`.
pub fn default_embed_len(nu: usize) -> usize {
    (2 * (nu.max(2) - 1)).next_power_of_two()
}

/// Builds a plan for paths of `nu` samples (`B(0), …, B(ν-1)`).
pub fn build_plan(spec: &OfbmSpec, nu: usize) -> Result<SynthesisPlan> {
    if nu < 2 {
        return Err(Error::invalid(format!("path length nu = {nu} must be at least 2")));
    }
    let n = spec.n();
    let mut embed_len = default_embed_len(nu);
    let mut attempt = 0;
    loop {
        let half = embed_len / 2;
        let mut factors = vec![0.0; (half + 1) * n * n];
        let report = for_each_spectral_eigen(spec, embed_len, |f, eig| {
            let block = &mut factors[f * n * n..(f + 1) * n * n];
            for q in 0..n {
                let root = eig.eigvals[q].max(0.0).sqrt();
                for i in 0..n {
                    block[q * n + i] = eig.eigvecs[(i, q)] * root;
                }
            }
        })?;
        if report.passed {
            let ifft = FftPlanner::<f64>::new().plan_fft_inverse(embed_len);
            return Ok(SynthesisPlan { spec: spec.clone(), nu, embed_len, factors, ifft });
        }
        if attempt == MAX_EMBED_DOUBLINGS {
            return Err(Error::Admissibility(report));
        }
        log::info!("embedding length {embed_len} inadmissible, doubling");
        attempt += 1;
        embed_len *= 2;
    }
}

/// Draws one path. Deterministic in `(plan, seed)`.
pub fn synthesize(plan: &SynthesisPlan, seed: u64) -> SamplePath {
    let n = plan.spec.n();
    let m = plan.embed_len;
    let half = m / 2;
    let steps = plan.nu - 1;
    let mut rng = rng_from_seed(seed);

    // Frequency-domain white noise ξ(f), f = 0..=M/2, with E[ξ ξ*] = I and
    // E[ξ ξᵀ] = 0 off the self-conjugate frequencies 0 and M/2.
    let mut xi = vec![Complex64::new(0.0, 0.0); (half + 1) * n];
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for f in 0..=half {
        for j in 0..n {
            xi[f * n + j] = if f == 0 || f == half {
                Complex64::new(StandardNormal.sample(&mut rng), 0.0)
            } else {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re * inv_sqrt2, im * inv_sqrt2)
            };
        }
    }

    let norm = 1.0 / (m as f64).sqrt();
    let mut premix = DMatrix::<f64>::zeros(plan.nu, n);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.ifft.get_inplace_scratch_len()];
    for i in 0..n {
        for f in 0..=half {
            let a = &plan.factors[f * n * n..(f + 1) * n * n];
            let xf = &xi[f * n..(f + 1) * n];
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += xf[j] * a[j * n + i];
            }
            buf[f] = acc;
            if f != 0 && f != half {
                buf[m - f] = acc.conj();
            }
        }
        plan.ifft.process_with_scratch(&mut buf, &mut scratch);
        let mut level = 0.0;
        premix[(0, i)] = 0.0;
        for k in 0..steps {
            level += buf[k].re * norm;
            premix[(k + 1, i)] = level;
        }
    }

    let data = premix * plan.spec.mixing().transpose();
    SamplePath::new(data)
        .expect("synthesized samples are finite")
        .with_meta(PathMeta { seed, spec_fingerprint: plan.spec.fingerprint() })
}

/// Brute-force generator: Cholesky factor of the full `((ν-1)n)²` covariance
/// of `B(1), …, B(ν-1)`; `B(0) = 0`. Test use only.
#[derive(Debug, Clone)]
pub struct CholeskyOracle {
    nu: usize,
    n: usize,
    lower: DMatrix<f64>,
    fingerprint: u64,
}

impl CholeskyOracle {
    pub fn new(spec: &OfbmSpec, nu: usize) -> Result<Self> {
        if !(2..=ORACLE_MAX_NU).contains(&nu) {
            return Err(Error::invalid(format!("cholesky_oracle: nu = {nu} outside 2..={ORACLE_MAX_NU}")));
        }
        let times: Vec<u64> = (1..nu as u64).collect();
        let cov = exact_path_covariance(spec, &times)?;
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::Factorization("path covariance is not numerically positive definite".into()))?;
        Ok(Self { nu, n: spec.n(), lower: chol.l(), fingerprint: spec.fingerprint() })
    }

    pub fn sample(&self, seed: u64) -> SamplePath {
        let mut rng = rng_from_seed(seed);
        let dim = self.lower.nrows();
        let z = nalgebra::DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        let x = &self.lower * z;
        let mut data = DMatrix::zeros(self.nu, self.n);
        for a in 0..self.nu - 1 {
            for i in 0..self.n {
                data[(a + 1, i)] = x[a * self.n + i];
            }
        }
        SamplePath::new(data)
            .expect("oracle samples are finite")
            .with_meta(PathMeta { seed, spec_fingerprint: self.fingerprint })
    }
}

/// One-shot [`CholeskyOracle`] draw.
pub fn cholesky_oracle(spec: &OfbmSpec, nu: usize, seed: u64) -> Result<SamplePath> {
    Ok(CholeskyOracle::new(spec, nu)?.sample(seed))
}
