//! The generative model: Hurst eigenvalues, mixing matrix and pre-mix
//! covariance of a time-reversible operator fractional Brownian motion, and
//! the exact covariances derived from them.
//!
//! The process is `B(t) = P X(t)` where `X` is a multivariate fBm whose
//! coordinates satisfy
//! `E[X_i(s) X_j(t)] = (σ_ij / 2)(|s|^(h_i+h_j) + |t|^(h_i+h_j) - |t-s|^(h_i+h_j))`.
//! Then `B(ct)` has the law of `P diag(c^h) P⁻¹ B(t)`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{eigh_sorted, SymmetricEigen};

/// Generative model of a time-reversible OFBM with real, diagonalizable Hurst matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDocument", into = "SpecDocument")]
pub struct OfbmSpec {
    hurst: Vec<f64>,
    mixing: DMatrix<f64>,
    premix_cov: DMatrix<f64>,
}

/// Row-major JSON form of [`OfbmSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecDocument {
    pub n: usize,
    pub hurst: Vec<f64>,
    pub mixing: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premix_cov: Option<Vec<Vec<f64>>>,
}

const COLUMN_NORM_TOL: f64 = 1e-12;

impl OfbmSpec {
    /// Validates and builds a spec. Mixing columns that are not unit-norm are
    /// rescaled (with a warning).
    pub fn new(hurst: Vec<f64>, mixing: DMatrix<f64>, premix_cov: DMatrix<f64>) -> Result<Self> {
        let n = hurst.len();
        if n == 0 {
            return Err(Error::invalid("dimension n must be at least 1"));
        }
        if mixing.shape() != (n, n) || premix_cov.shape() != (n, n) {
            return Err(Error::invalid(format!(
                "expected {n}x{n} mixing and premix_cov, got {:?} and {:?}",
                mixing.shape(),
                premix_cov.shape()
            )));
        }
        for (q, &h) in hurst.iter().enumerate() {
            if !(h.is_finite() && h > 0.0 && h < 1.0) {
                return Err(Error::invalid(format!("hurst[{q}] = {h} is outside (0, 1)")));
            }
        }
        if hurst.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("hurst eigenvalues must be sorted ascending"));
        }
        if mixing.iter().chain(premix_cov.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("mixing and premix_cov entries must be finite"));
        }

        let mut mixing = mixing;
        for q in 0..n {
            let norm = mixing.column(q).norm();
            if norm == 0.0 {
                return Err(Error::invalid(format!("mixing column {q} is zero")));
            }
            if (norm - 1.0).abs() > COLUMN_NORM_TOL {
                log::warn!("mixing column {q} has norm {norm}; rescaling to unit norm");
                mixing.column_mut(q).scale_mut(1.0 / norm);
            }
        }
        let sv = mixing.singular_values();
        let (smin, smax) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        if smin <= 1e-12 * smax {
            return Err(Error::invalid(format!(
                "mixing matrix is singular (condition number {:e})",
                smax / smin
            )));
        }

        let scale = premix_cov.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..n {
            if premix_cov[(i, i)] <= 0.0 {
                return Err(Error::invalid(format!("premix_cov[{i}][{i}] must be positive")));
            }
            for j in (i + 1)..n {
                if (premix_cov[(i, j)] - premix_cov[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!("premix_cov not symmetric at ({i},{j})")));
                }
            }
        }
        let premix_cov = (&premix_cov + premix_cov.transpose()) * 0.5;
        let eig = eigh_sorted(&premix_cov)?;
        if eig.eigvals[0] < -1e-12 * scale {
            return Err(Error::invalid(format!(
                "premix_cov is not positive semidefinite (min eigenvalue {:e})",
                eig.eigvals[0]
            )));
        }
        Ok(Self { hurst, mixing, premix_cov })
    }

    /// Entrywise-scaling model: identity mixing, independent unit-variance coordinates.
    pub fn entrywise(hurst: Vec<f64>) -> Result<Self> {
        let n = hurst.len();
        Self::new(hurst, DMatrix::identity(n, n), DMatrix::identity(n, n))
    }

    /// The six-variate reference configuration: h = (0.3, 0.4, 0.5, 0.7, 0.8, 0.9)
    /// with a fixed non-orthogonal mixing matrix and independent pre-mix coordinates.
    pub fn reference_six_variate() -> Self {
        #[rustfmt::skip]
        let p = DMatrix::from_row_slice(6, 6, &[
             0.6468,  0.3846,  0.4436, -0.5175,  0.0,     0.4000,
            -0.3234,  0.7692, -0.5070,  0.0,     0.1387,  0.4667,
             0.1941, -0.1538,  0.6337, -0.3696, -0.1387,  0.0,
            -0.2587,  0.4615,  0.3802,  0.7392, -0.4160,  0.4000,
             0.3234,  0.0,     0.0,     0.0,     0.6934, -0.1333,
             0.5175,  0.1538,  0.0,    -0.2218,  0.5547,  0.6667,
        ]);
        Self::new(vec![0.3, 0.4, 0.5, 0.7, 0.8, 0.9], p, DMatrix::identity(6, 6))
            .expect("reference configuration is valid")
    }

    /// Model with a random orthogonal mixing matrix (Haar-distributed via QR),
    /// deterministic in `seed`.
    pub fn with_random_orthogonal_mixing(hurst: Vec<f64>, seed: u64) -> Result<Self> {
        let n = hurst.len();
        let mut rng = crate::rng::rng_from_seed(seed);
        let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let qr = g.qr();
        let (mut q, r) = (qr.q(), qr.r());
        for k in 0..n {
            if r[(k, k)] < 0.0 {
                q.column_mut(k).neg_mut();
            }
        }
        Self::new(hurst, q, DMatrix::identity(n, n))
    }

    /// Replaces the pre-mix covariance.
    pub fn with_premix_cov(self, premix_cov: DMatrix<f64>) -> Result<Self> {
        Self::new(self.hurst, self.mixing, premix_cov)
    }

    pub fn n(&self) -> usize {
        self.hurst.len()
    }

    pub fn hurst(&self) -> &[f64] {
        &self.hurst
    }

    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.mixing
    }

    pub fn premix_cov(&self) -> &DMatrix<f64> {
        &self.premix_cov
    }

    /// `H = P diag(h) P⁻¹`.
    pub fn hurst_matrix(&self) -> DMatrix<f64> {
        let inv = self.mixing.clone().try_inverse().expect("mixing validated nonsingular");
        &self.mixing * DMatrix::from_diagonal(&DVector::from_column_slice(&self.hurst)) * inv
    }

    /// `c^H = P diag(c^h_q) P⁻¹`.
    pub fn scaling_matrix(&self, c: f64) -> DMatrix<f64> {
        let inv = self.mixing.clone().try_inverse().expect("mixing validated nonsingular");
        let d = DVector::from_iterator(self.n(), self.hurst.iter().map(|h| c.powf(*h)));
        &self.mixing * DMatrix::from_diagonal(&d) * inv
    }

    /// Conditions under which the discrete-time asymptotics are stated:
    /// no eigenvalue equal to 1/2, all eigenvalues simple. Returns the
    /// violated conditions as messages; synthesis and estimation still run.
    pub fn theory_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (q, h) in self.hurst.iter().enumerate() {
            if *h == 0.5 {
                out.push(format!("hurst[{q}] = 1/2: asymptotic normality of the estimator is not covered"));
            }
        }
        for w in self.hurst.windows(2) {
            if w[0] == w[1] {
                out.push(format!("repeated hurst eigenvalue {}: eigenvalues are not simple", w[0]));
            }
        }
        out
    }

    /// FNV-1a hash of the canonical JSON form, for provenance records.
    pub fn fingerprint(&self) -> u64 {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

impl TryFrom<SpecDocument> for OfbmSpec {
    type Error = Error;

    fn try_from(doc: SpecDocument) -> Result<Self> {
        let n = doc.n;
        if doc.hurst.len() != n {
            return Err(Error::invalid(format!("n = {n} but hurst has {} entries", doc.hurst.len())));
        }
        let mixing = matrix_from_rows(&doc.mixing, n, "mixing")?;
        let premix_cov = match &doc.premix_cov {
            Some(rows) => matrix_from_rows(rows, n, "premix_cov")?,
            None => DMatrix::identity(n, n),
        };
        OfbmSpec::new(doc.hurst, mixing, premix_cov)
    }
}

impl From<OfbmSpec> for SpecDocument {
    fn from(spec: OfbmSpec) -> Self {
        SpecDocument {
            n: spec.n(),
            hurst: spec.hurst.clone(),
            mixing: rows_of(&spec.mixing),
            premix_cov: Some(rows_of(&spec.premix_cov)),
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::invalid(format!("{name} must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Provenance of a synthesized path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathMeta {
    pub seed: u64,
    pub spec_fingerprint: u64,
}

/// Discrete-time observations, row `k` is `B(k)`, unit sampling step.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    data: DMatrix<f64>,
    meta: Option<PathMeta>,
}

impl SamplePath {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::invalid("sample path must have at least one row and one column"));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            let (row, col) = (pos % data.nrows(), pos / data.nrows());
            return Err(Error::invalid(format!("non-finite sample at row {row}, column {col}")));
        }
        Ok(Self { data, meta: None })
    }

    pub fn with_meta(mut self, meta: PathMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn meta(&self) -> Option<PathMeta> {
        self.meta
    }

    pub fn nu(&self) -> usize {
        self.data.nrows()
    }

    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    /// Rows `start..start+len`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.nu() || len == 0 {
            return Err(Error::invalid(format!("window {start}+{len} outside path of length {}", self.nu())));
        }
        Self::new(self.data.rows(start, len).into_owned())
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what}: non-finite input")))
    }
}

/// Cross-covariance `E[X_i(s) X_j(t)]` of a time-reversible multivariate fBm.
pub fn mfbm_covariance(hurst_i: f64, hurst_j: f64, sigma_ij: f64, s: f64, t: f64) -> Result<f64> {
    check_finite(&[hurst_i, hurst_j, sigma_ij, s, t], "mfbm_covariance")?;
    for h in [hurst_i, hurst_j] {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::invalid(format!("mfbm_covariance: hurst {h} outside (0, 1)")));
        }
    }
    let e = hurst_i + hurst_j;
    Ok(0.5 * sigma_ij * (s.abs().powf(e) + t.abs().powf(e) - (t - s).abs().powf(e)))
}

/// `|k+1|^e - 2|k|^e + |k-1|^e`, accurate to a few ulps for large `k`.
///
/// For `k >= 16` this is `k^e * 2 Σ_{m≥1} C(e, 2m) k^(-2m)`, which avoids the
/// cancellation of the direct formula.
pub(crate) fn second_difference(k: f64, e: f64) -> f64 {
    let k = k.abs();
    if k < 16.0 {
        return (k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e);
    }
    let x2 = 1.0 / (k * k);
    let mut binom = 1.0; // C(e, r)
    let mut pow = 1.0;
    let mut sum = 0.0;
    for m in 1..64 {
        let r = (2 * m) as f64;
        binom *= (e - r + 2.0) / (r - 1.0);
        binom *= (e - r + 1.0) / r;
        pow *= x2;
        let term = binom * pow;
        sum += term;
        if term.abs() <= 1e-19 * sum.abs() {
            break;
        }
    }
    2.0 * k.powf(e) * sum
}

/// Pre-mix increment cross-covariance `γ_ij(k) = E[ΔX_i(0) ΔX_j(k)]` at lag `k`.
pub fn increment_covariance(spec: &OfbmSpec, lag: i64) -> DMatrix<f64> {
    let n = spec.n();
    DMatrix::from_fn(n, n, |i, j| {
        let e = spec.hurst[i] + spec.hurst[j];
        0.5 * spec.premix_cov[(i, j)] * second_difference(lag as f64, e)
    })
}

/// Pre-mix covariance block `E[X(s) X(t)ᵀ]`.
fn premix_block(spec: &OfbmSpec, s: f64, t: f64) -> DMatrix<f64> {
    let n = spec.n();
    DMatrix::from_fn(n, n, |i, j| {
        let e = spec.hurst[i] + spec.hurst[j];
        0.5 * spec.premix_cov[(i, j)] * (s.abs().powf(e) + t.abs().powf(e) - (t - s).abs().powf(e))
    })
}

/// Joint covariance of `(B(t_1), …, B(t_m))`, index `a*n + i` for time `t_a`
/// and coordinate `i`.
pub fn exact_path_covariance(spec: &OfbmSpec, times: &[u64]) -> Result<DMatrix<f64>> {
    let mut sorted = times.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("exact_path_covariance: times must be distinct"));
    }
    let max_t = sorted.last().copied().unwrap_or(0).max(1) as usize;
    let report = check_admissibility(spec, (2 * max_t).next_power_of_two())?;
    if !report.passed {
        return Err(Error::Admissibility(report));
    }

    let n = spec.n();
    let m = times.len();
    let p = &spec.mixing;
    let mut out = DMatrix::zeros(m * n, m * n);
    for a in 0..m {
        for b in a..m {
            let block = p * premix_block(spec, times[a] as f64, times[b] as f64) * p.transpose();
            for i in 0..n {
                for j in 0..n {
                    out[(a * n + i, b * n + j)] = block[(i, j)];
                    out[(b * n + j, a * n + i)] = block[(i, j)];
                }
            }
        }
    }
    Ok(out)
}

/// Outcome of the circulant-embedding validity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub embed_len: usize,
    pub passed: bool,
    /// Fourier index of the block with the smallest eigenvalue.
    pub worst_frequency: usize,
    pub worst_min_eigenvalue: f64,
    /// Largest eigenvalue magnitude over all blocks.
    pub max_block_norm: f64,
}

impl fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "embedding length {}: min spectral eigenvalue {:e} at frequency index {} (max block norm {:e}); {}",
            self.embed_len,
            self.worst_min_eigenvalue,
            self.worst_frequency,
            self.max_block_norm,
            if self.passed { "admissible" } else { "increase the embedding length or reduce |σ_ij|" }
        )
    }
}

/// Relative tolerance on negative spectral eigenvalues.
pub const ADMISSIBILITY_TOL: f64 = 1e-9;

/// Real symmetric `n×n` spectral blocks of the circulant embedding of the
/// pre-mix increment covariance, for Fourier indices `0..=embed_len/2`.
///
/// Blocks are stored column-major and contiguous, `n*n` values per index.
pub(crate) fn spectral_blocks(spec: &OfbmSpec, embed_len: usize) -> Result<Vec<f64>> {
    if embed_len < 2 || !embed_len.is_power_of_two() {
        return Err(Error::invalid(format!("embedding length {embed_len} is not a power of two >= 2")));
    }
    let n = spec.n();
    let half = embed_len / 2;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(embed_len);
    let mut blocks = vec![0.0; (half + 1) * n * n];
    let mut buf = vec![Complex64::new(0.0, 0.0); embed_len];
    for i in 0..n {
        for j in i..n {
            let e = spec.hurst[i] + spec.hurst[j];
            let scale = 0.5 * spec.premix_cov[(i, j)];
            for (k, slot) in buf.iter_mut().enumerate() {
                let lag = k.min(embed_len - k);
                *slot = Complex64::new(scale * second_difference(lag as f64, e), 0.0);
            }
            fft.process(&mut buf);
            for f in 0..=half {
                let v = buf[f].re;
                blocks[f * n * n + j * n + i] = v;
                blocks[f * n * n + i * n + j] = v;
            }
        }
    }
    Ok(blocks)
}

/// Visits the eigen-decomposition of every spectral block.
pub(crate) fn for_each_spectral_eigen<F>(spec: &OfbmSpec, embed_len: usize, mut visit: F) -> Result<AdmissibilityReport>
where
    F: FnMut(usize, &SymmetricEigen),
{
    let n = spec.n();
    let blocks = spectral_blocks(spec, embed_len)?;
    let mut worst = (0usize, f64::INFINITY);
    let mut max_norm = 0.0f64;
    for (f, block) in blocks.chunks_exact(n * n).enumerate() {
        let eig = eigh_sorted(&DMatrix::from_column_slice(n, n, block))?;
        let lo = eig.eigvals[0];
        let hi = eig.eigvals[n - 1];
        max_norm = max_norm.max(lo.abs()).max(hi.abs());
        if lo < worst.1 {
            worst = (f, lo);
        }
        visit(f, &eig);
    }
    Ok(AdmissibilityReport {
        embed_len,
        passed: worst.1 >= -ADMISSIBILITY_TOL * max_norm,
        worst_frequency: worst.0,
        worst_min_eigenvalue: worst.1,
        max_block_norm: max_norm,
    })
}

/// Checks that every spectral block of the circulant embedding of length
/// `embed_len` is positive semidefinite within tolerance.
pub fn check_admissibility(spec: &OfbmSpec, embed_len: usize) -> Result<AdmissibilityReport> {
    for_each_spectral_eigen(spec, embed_len, |_, _| {})
}
