use nalgebra::DMatrix;

use super::WaveletBank;
use crate::error::{Error, Result};
use crate::model::SamplePath;

/// Normalized detail coefficients `D̃(2^j, k) = 2^{-j/2} d̃_{j,k}` at one octave,
/// one row per retained shift `k`, one column per component.
#[derive(Debug, Clone, PartialEq)]
pub struct OctaveCoefficients {
    octave: u32,
    coeffs: DMatrix<f64>,
}

impl OctaveCoefficients {
    pub fn new(octave: u32, coeffs: DMatrix<f64>) -> Result<Self> {
        if coeffs.nrows() == 0 {
            return Err(Error::invalid(format!("octave {octave}: no coefficients")));
        }
        Ok(Self { octave, coeffs })
    }

    pub fn octave(&self) -> u32 {
        self.octave
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    /// `K_j`, the number of boundary-free coefficients.
    pub fn k_count(&self) -> usize {
        self.coeffs.nrows()
    }
}

/// `K_1, …, K_{j_max}` for a length-`nu` input. A coefficient at octave
/// `j+1` is kept only if its whole filter support lies in the retained
/// approximation at octave `j`: `K_{j+1} = ⌊(K_j - L)/2⌋ + 1` when `K_j ≥ L`.
pub fn coefficient_counts(nu: usize, filter_len: usize, j_max: u32) -> Vec<usize> {
    let mut out = Vec::with_capacity(j_max as usize);
    let mut k = nu;
    for _ in 0..j_max {
        k = if k >= filter_len { (k - filter_len) / 2 + 1 } else { 0 };
        out.push(k);
    }
    out
}

fn deepest_nonempty(nu: usize, filter_len: usize) -> u32 {
    let mut k = nu;
    let mut j = 0;
    while k >= filter_len {
        k = (k - filter_len) / 2 + 1;
        j += 1;
    }
    j
}

/// Univariate pyramid: normalized details for octaves `1..=j_max`.
pub fn pyramid_column(x: &[f64], bank: &WaveletBank, j_max: u32) -> Result<Vec<Vec<f64>>> {
    let h = bank.lowpass();
    let g = bank.highpass();
    let l = h.len();
    if j_max == 0 {
        return Err(Error::invalid("j_max must be at least 1"));
    }
    let counts = coefficient_counts(x.len(), l, j_max);
    if counts.last().copied().unwrap_or(0) == 0 {
        return Err(Error::OctaveInfeasible { requested: j_max, deepest: deepest_nonempty(x.len(), l) });
    }

    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(j_max as usize);
    for (j, &k_next) in (1..=j_max).zip(&counts) {
        let norm = 2f64.powf(-0.5 * j as f64);
        let mut a_next = Vec::with_capacity(k_next);
        let mut d = Vec::with_capacity(k_next);
        for k in 0..k_next {
            let window = &approx[2 * k..2 * k + l];
            let mut sa = 0.0;
            let mut sd = 0.0;
            for m in 0..l {
                sa += h[m] * window[m];
                sd += g[m] * window[m];
            }
            a_next.push(sa);
            d.push(sd * norm);
        }
        details.push(d);
        approx = a_next;
    }
    Ok(details)
}

/// Boundary-free Mallat pyramid applied independently to every component,
/// initialized with `ã_{0,k} = B(k)`.
pub fn pyramid(path: &SamplePath, bank: &WaveletBank, j_max: u32) -> Result<Vec<OctaveCoefficients>> {
    let data = path.data();
    let n = path.n();
    let columns: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| pyramid_column(data.column(i).as_slice(), bank, j_max))
        .collect::<Result<_>>()?;
    (0..j_max as usize)
        .map(|jj| {
            let k = columns[0][jj].len();
            OctaveCoefficients::new(jj as u32 + 1, DMatrix::from_fn(k, n, |r, c| columns[c][jj][r]))
        })
        .collect()
}

/// Default coarsest regression octave `⌊log₂ν⌋ - N_ψ`, lowered until
/// `K_j ≥ n + 1`.
pub fn deepest_octave(nu: usize, bank: &WaveletBank, n: usize) -> Result<u32> {
    let n_moments = bank.n_moments();
    if nu < 1usize << (n_moments + 1) {
        return Err(Error::invalid(format!(
            "sample size {nu} too short for {n_moments} vanishing moments (need at least {})",
            1usize << (n_moments + 1)
        )));
    }
    let log2 = nu.ilog2();
    let mut j2 = log2.saturating_sub(n_moments as u32);
    let counts = coefficient_counts(nu, bank.len(), j2);
    while j2 >= 1 && counts[j2 as usize - 1] < n + 1 {
        j2 -= 1;
    }
    if j2 == 0 {
        return Err(Error::invalid(format!(
            "no octave of a length-{nu} path keeps at least {} coefficients",
            n + 1
        )));
    }
    Ok(j2)
}
