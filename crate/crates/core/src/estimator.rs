//! Wavelet eigenvalue regression.
//!
//! With weights satisfying `Σ w_j = 0` and `Σ j w_j = 1`, the estimate of the
//! q-th Hurst eigenvalue is `ĥ_q = ½ Σ_j w_j log₂ λ_q(W(2^j))`, eigenvalues
//! sorted ascending. The coordinate-wise baseline applies the same regression
//! to the diagonal entries `W(2^j)_qq`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SamplePath;
use crate::spectrum::WaveletSpectrum;

/// Tolerance on the two weight identities.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Octave confidence scalars `b_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightPolicy {
    #[serde(rename = "uniform")]
    Uniform,
    /// `b_j = ν / 2^j`, proportional to the number of coefficients.
    #[serde(rename = "nu-over-2j")]
    NuOver2j,
}

impl std::str::FromStr for WeightPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "nu-over-2j" => Ok(Self::NuOver2j),
            other => Err(Error::invalid(format!("unknown weight policy '{other}' (expected uniform or nu-over-2j)"))),
        }
    }
}

/// Regression weights over octaves `j1..=j2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionWeights {
    pub j1: u32,
    pub j2: u32,
    pub b: Vec<f64>,
    pub w: Vec<f64>,
}

/// `w_j = b_j (V₀ j - V₁) / (V₀V₂ - V₁²)`, `V_p = Σ j^p b_j`.
pub fn make_weights(j1: u32, j2: u32, b: &[f64]) -> Result<RegressionWeights> {
    if j2 <= j1 {
        return Err(Error::invalid(format!("octave range needs j2 > j1, got ({j1}, {j2})")));
    }
    let m = (j2 - j1 + 1) as usize;
    if b.len() != m {
        return Err(Error::invalid(format!("expected {m} confidence scalars, got {}", b.len())));
    }
    if b.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid("confidence scalars must be finite and nonnegative"));
    }
    if b.iter().filter(|x| **x > 0.0).count() < 2 {
        return Err(Error::invalid("at least two octaves need positive confidence"));
    }
    let js = (j1..=j2).map(f64::from);
    let (v0, v1, v2) = js.clone().zip(b).fold((0.0, 0.0, 0.0), |(a, c, d), (j, bj)| {
        (a + bj, c + j * bj, d + j * j * bj)
    });
    let denom = v0 * v2 - v1 * v1;
    if !(denom > 1e-12 * v0 * v2) {
        return Err(Error::invalid(format!("degenerate confidence scalars (V0 V2 - V1^2 = {denom:e})")));
    }
    let w: Vec<f64> = js.zip(b).map(|(j, bj)| bj * (v0 * j - v1) / denom).collect();
    let weights = RegressionWeights { j1, j2, b: b.to_vec(), w };
    let (s0, s1) = weights.constraint_sums();
    if (s0).abs() > WEIGHT_TOL || (s1 - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::invalid(format!("weights violate constraints: Σw = {s0:e}, Σjw - 1 = {:e}", s1 - 1.0)));
    }
    Ok(weights)
}

impl RegressionWeights {
    pub fn from_policy(j1: u32, j2: u32, policy: WeightPolicy, nu: usize) -> Result<Self> {
        if j2 <= j1 {
            return Err(Error::invalid(format!("octave range needs j2 > j1, got ({j1}, {j2})")));
        }
        let b: Vec<f64> = (j1..=j2)
            .map(|j| match policy {
                WeightPolicy::Uniform => 1.0,
                WeightPolicy::NuOver2j => nu as f64 / 2f64.powi(j as i32),
            })
            .collect();
        make_weights(j1, j2, &b)
    }

    /// `(Σ w_j, Σ j w_j)`.
    pub fn constraint_sums(&self) -> (f64, f64) {
        self.octaves().zip(&self.w).fold((0.0, 0.0), |(a, c), (j, w)| (a + w, c + f64::from(j) * w))
    }

    pub fn octaves(&self) -> std::ops::RangeInclusive<u32> {
        self.j1..=self.j2
    }

    /// Weighted slope `Σ w_j y_j` of a series indexed by octave `j1..=j2`.
    pub fn slope(&self, y: &[f64]) -> f64 {
        self.w.iter().zip(y).map(|(w, v)| w * v).sum()
    }

    /// Weighted least-squares residuals of `y` around the fitted line.
    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        let slope = self.slope(y);
        let v0: f64 = self.b.iter().sum();
        let intercept = self.octaves().zip(&self.b).zip(y).map(|((j, b), v)| b * (v - slope * f64::from(j))).sum::<f64>() / v0;
        self.octaves().zip(y).map(|(j, v)| v - intercept - slope * f64::from(j)).collect()
    }
}

/// log₂ eigenvalue and diagonal tables, keyed by octave.
#[derive(Debug, Clone, PartialEq)]
struct LogTables {
    n: usize,
    k_counts: BTreeMap<u32, usize>,
    log2_eig: BTreeMap<u32, Vec<f64>>,
    log2_diag: BTreeMap<u32, Vec<f64>>,
}

impl LogTables {
    fn from_spectrum(s: &WaveletSpectrum) -> Self {
        let mut t = LogTables { n: s.n(), k_counts: BTreeMap::new(), log2_eig: BTreeMap::new(), log2_diag: BTreeMap::new() };
        for o in s.octaves() {
            t.k_counts.insert(o.octave, o.k_count);
            t.log2_eig.insert(o.octave, o.eig_log2());
            t.log2_diag.insert(o.octave, o.diag_log2());
        }
        t
    }

    fn series(&self, table: &BTreeMap<u32, Vec<f64>>, weights: &RegressionWeights, q: usize, what: &str) -> Result<Vec<f64>> {
        weights
            .octaves()
            .map(|j| {
                let row = table.get(&j).ok_or_else(|| {
                    Error::invalid(format!("octave {j} of the regression range is missing from the spectrum"))
                })?;
                let v = row[q];
                if v.is_finite() {
                    Ok(v)
                } else {
                    log::debug!("nonpositive {what} at j={j}, q={}", q + 1);
                    Err(Error::NonPositiveEigenvalue { octave: j, index: q + 1, value: 2f64.powf(v) })
                }
            })
            .collect()
    }

    fn regress(&self, table: &BTreeMap<u32, Vec<f64>>, weights: &RegressionWeights, what: &str) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let mut h = Vec::with_capacity(self.n);
        let mut res = Vec::with_capacity(self.n);
        for q in 0..self.n {
            let y = self.series(table, weights, q, what)?;
            h.push(0.5 * weights.slope(&y));
            res.push(weights.residuals(&y));
        }
        Ok((h, res))
    }
}

/// `ĥ_q = ½ Σ w_j log₂ λ_q(W(2^j))`, `q = 1..n`.
pub fn estimate_multivariate(spectrum: &WaveletSpectrum, weights: &RegressionWeights) -> Result<Vec<f64>> {
    let t = LogTables::from_spectrum(spectrum);
    Ok(t.regress(&t.log2_eig, weights, "eigenvalue")?.0)
}

/// `ĥ^U_q = ½ Σ w_j log₂ W(2^j)_qq`, `q = 1..n`.
pub fn estimate_univariate(spectrum: &WaveletSpectrum, weights: &RegressionWeights) -> Result<Vec<f64>> {
    let t = LogTables::from_spectrum(spectrum);
    Ok(t.regress(&t.log2_diag, weights, "diagonal entry")?.0)
}

/// Both estimators with their regression diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct HurstEstimates {
    /// Ascending-eigenvalue order.
    pub h_multivariate: Vec<f64>,
    /// Coordinate order.
    pub h_univariate: Vec<f64>,
    pub weights: RegressionWeights,
    pub k_counts: BTreeMap<u32, usize>,
    pub log2_eig: BTreeMap<u32, Vec<f64>>,
    pub log2_diag: BTreeMap<u32, Vec<f64>>,
    /// Residuals indexed `[q][j - j1]`.
    pub residuals_multivariate: Vec<Vec<f64>>,
    pub residuals_univariate: Vec<Vec<f64>>,
    /// Number of spectra combined (1 unless aggregated across subtraces).
    pub subtraces: usize,
}

fn finish(t: LogTables, weights: &RegressionWeights, subtraces: usize) -> Result<HurstEstimates> {
    let (h_multivariate, residuals_multivariate) = t.regress(&t.log2_eig, weights, "eigenvalue")?;
    let (h_univariate, residuals_univariate) = t.regress(&t.log2_diag, weights, "diagonal entry")?;
    Ok(HurstEstimates {
        h_multivariate,
        h_univariate,
        weights: weights.clone(),
        k_counts: t.k_counts,
        log2_eig: t.log2_eig,
        log2_diag: t.log2_diag,
        residuals_multivariate,
        residuals_univariate,
        subtraces,
    })
}

pub fn estimate(spectrum: &WaveletSpectrum, weights: &RegressionWeights) -> Result<HurstEstimates> {
    finish(LogTables::from_spectrum(spectrum), weights, 1)
}

/// How per-subtrace log₂ statistics are combined before regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Median,
    Mean,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Combines `log₂λ_q(2^j)` and `log₂W_qq(2^j)` across subtraces entrywise,
/// then regresses. `K_j` is reported as the minimum across subtraces.
pub fn aggregate_estimate(spectra: &[WaveletSpectrum], weights: &RegressionWeights, how: Aggregation) -> Result<HurstEstimates> {
    let first = spectra.first().ok_or_else(|| Error::invalid("no subtraces"))?;
    let grid = first.octave_numbers();
    for (i, s) in spectra.iter().enumerate() {
        if s.n() != first.n() {
            return Err(Error::invalid(format!("subtrace {i} has dimension {} but subtrace 0 has {}", s.n(), first.n())));
        }
        if s.octave_numbers() != grid {
            return Err(Error::invalid(format!("subtrace {i} has a different octave grid")));
        }
    }
    let tables: Vec<LogTables> = spectra.iter().map(LogTables::from_spectrum).collect();
    let n = first.n();
    let combine = |pick: &dyn Fn(&LogTables) -> &BTreeMap<u32, Vec<f64>>| -> BTreeMap<u32, Vec<f64>> {
        grid.iter()
            .map(|&j| {
                let row = (0..n)
                    .map(|q| {
                        let mut v: Vec<f64> = tables.iter().map(|t| pick(t)[&j][q]).collect();
                        match how {
                            Aggregation::Median => median(&mut v),
                            Aggregation::Mean => v.iter().sum::<f64>() / v.len() as f64,
                        }
                    })
                    .collect();
                (j, row)
            })
            .collect()
    };
    let combined = LogTables {
        n,
        k_counts: grid.iter().map(|&j| (j, tables.iter().map(|t| t.k_counts[&j]).min().unwrap_or(0))).collect(),
        log2_eig: combine(&|t| &t.log2_eig),
        log2_diag: combine(&|t| &t.log2_diag),
    };
    finish(combined, weights, spectra.len())
}

/// Entrywise median across subtraces, then regression.
pub fn median_estimate(spectra: &[WaveletSpectrum], weights: &RegressionWeights) -> Result<HurstEstimates> {
    aggregate_estimate(spectra, weights, Aggregation::Median)
}

/// Splits a path into `m` time-interleaved subtraces: subtrace `r` holds rows
/// `r, r+m, r+2m, …`, truncated to a common length.
pub fn interleave_subtraces(path: &SamplePath, m: usize) -> Result<Vec<SamplePath>> {
    if m == 0 || m > path.nu() {
        return Err(Error::invalid(format!("cannot split a length-{} path into {m} subtraces", path.nu())));
    }
    let len = path.nu() / m;
    let data = path.data();
    (0..m)
        .map(|r| SamplePath::new(DMatrix::from_fn(len, path.n(), |k, c| data[(r + k * m, c)])))
        .collect()
}

/// Upper regression octave: a fixed value or the default coarsest octave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UpperOctave {
    Fixed(u32),
    Auto(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoKeyword {
    #[serde(rename = "auto")]
    Auto,
}

impl Default for UpperOctave {
    fn default() -> Self {
        UpperOctave::Auto(AutoKeyword::Auto)
    }
}

impl std::str::FromStr for UpperOctave {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Self::default());
        }
        s.parse::<u32>()
            .map(UpperOctave::Fixed)
            .map_err(|_| Error::invalid(format!("j2 must be 'auto' or a positive integer, got '{s}'")))
    }
}

/// Default lower regression octave.
pub const DEFAULT_J1: u32 = 6;

/// Resolves `(j1, j2)` for an `n`-variate path of length `nu`.
pub fn resolve_octaves(nu: usize, bank: &crate::wavelet::WaveletBank, n: usize, j1: u32, j2: UpperOctave) -> Result<(u32, u32)> {
    let j2 = match j2 {
        UpperOctave::Auto(_) => crate::wavelet::deepest_octave(nu, bank, n)?,
        UpperOctave::Fixed(j) => {
            let counts = crate::wavelet::coefficient_counts(nu, bank.len(), j);
            if j == 0 || counts.last().copied().unwrap_or(0) == 0 {
                let deepest = counts.iter().take_while(|k| **k > 0).count() as u32;
                return Err(Error::OctaveInfeasible { requested: j, deepest });
            }
            j
        }
    };
    if j1 == 0 || j2 <= j1 {
        return Err(Error::invalid(format!("octave range ({j1}, {j2}) is empty; need 1 <= j1 < j2")));
    }
    if j1 < DEFAULT_J1 {
        log::warn!("j1 = {j1} < {DEFAULT_J1}: lower variance but larger bias");
    }
    Ok((j1, j2))
}

pub const SCHEMA_VERSION: u32 = 1;

/// JSON form of [`HurstEstimates`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatesDocument {
    pub schema_version: u32,
    pub j1: u32,
    pub j2: u32,
    pub b: Vec<f64>,
    pub w: Vec<f64>,
    pub h_multivariate: Vec<f64>,
    pub h_univariate: Vec<f64>,
    #[serde(rename = "K")]
    pub k: BTreeMap<u32, usize>,
    pub log2_eig: BTreeMap<u32, Vec<Option<f64>>>,
    pub log2_diag: BTreeMap<u32, Vec<Option<f64>>>,
    #[serde(default = "one")]
    pub m: usize,
}

fn one() -> usize {
    1
}

fn finite_or_null(t: &BTreeMap<u32, Vec<f64>>) -> BTreeMap<u32, Vec<Option<f64>>> {
    t.iter().map(|(j, v)| (*j, v.iter().map(|x| x.is_finite().then_some(*x)).collect())).collect()
}

impl HurstEstimates {
    pub fn to_document(&self) -> EstimatesDocument {
        EstimatesDocument {
            schema_version: SCHEMA_VERSION,
            j1: self.weights.j1,
            j2: self.weights.j2,
            b: self.weights.b.clone(),
            w: self.weights.w.clone(),
            h_multivariate: self.h_multivariate.clone(),
            h_univariate: self.h_univariate.clone(),
            k: self.k_counts.clone(),
            log2_eig: finite_or_null(&self.log2_eig),
            log2_diag: finite_or_null(&self.log2_diag),
            m: self.subtraces,
        }
    }
}
