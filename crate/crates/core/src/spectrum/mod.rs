//! Sample wavelet variance matrices, their sorted eigenstructure, and the
//! logscale diagram.

mod eigen;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

pub use eigen::{eigh_sorted, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::SamplePath;
use crate::wavelet::{pyramid, OctaveCoefficients, WaveletBank};

/// Relative tolerance below which negative eigenvalues of `W` are rounding.
pub const PSD_REPAIR_TOL: f64 = 1e-10;

/// `W(2^j) = (1/K_j) Σ_k D(2^j,k) D(2^j,k)ᵀ`, exactly symmetric.
pub fn wavelet_variance(coeffs: &OctaveCoefficients) -> Result<DMatrix<f64>> {
    let d = coeffs.coeffs();
    let k = d.nrows();
    if k == 0 {
        return Err(Error::invalid(format!("octave {}: K_j = 0", coeffs.octave())));
    }
    let n = d.ncols();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s = d.column(i).dot(&d.column(j)) / k as f64;
            w[(i, j)] = s;
            w[(j, i)] = s;
        }
    }
    Ok(w)
}

/// Wavelet variance and its eigen-decomposition at one octave.
#[derive(Debug, Clone, PartialEq)]
pub struct OctaveSpectrum {
    pub octave: u32,
    pub k_count: usize,
    pub w: DMatrix<f64>,
    /// Ascending, clipped at zero.
    pub eigvals: Vec<f64>,
    pub eigvecs: DMatrix<f64>,
}

impl OctaveSpectrum {
    pub fn from_coefficients(coeffs: &OctaveCoefficients) -> Result<Self> {
        let w = wavelet_variance(coeffs)?;
        let eig = eigh_sorted(&w)?;
        let norm = eig.eigvals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut eigvals = eig.eigvals;
        for (q, v) in eigvals.iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < -PSD_REPAIR_TOL * norm {
                    return Err(Error::NotPsd(format!(
                        "W(2^{}) has eigenvalue {:e} (q={}), beyond rounding of norm {:e}",
                        coeffs.octave(),
                        v,
                        q + 1,
                        norm
                    )));
                }
                *v = 0.0;
            }
        }
        Ok(Self { octave: coeffs.octave(), k_count: coeffs.k_count(), w, eigvals, eigvecs: eig.eigvecs })
    }

    /// `log₂ W_qq` per component.
    pub fn diag_log2(&self) -> Vec<f64> {
        self.w.diagonal().iter().map(|v| v.log2()).collect()
    }

    pub fn eig_log2(&self) -> Vec<f64> {
        self.eigvals.iter().map(|v| v.log2()).collect()
    }
}

/// Per-octave wavelet spectrum of an `n`-variate path.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletSpectrum {
    n: usize,
    octaves: Vec<OctaveSpectrum>,
}

impl WaveletSpectrum {
    pub fn from_octaves(octaves: Vec<OctaveSpectrum>) -> Result<Self> {
        let n = octaves.first().map(|o| o.w.nrows()).ok_or_else(|| Error::invalid("empty spectrum"))?;
        if octaves.iter().any(|o| o.w.nrows() != n) {
            return Err(Error::invalid("octaves disagree on dimension"));
        }
        if octaves.windows(2).any(|w| w[1].octave <= w[0].octave) {
            return Err(Error::invalid("octaves must be strictly increasing"));
        }
        Ok(Self { n, octaves })
    }

    pub fn from_coefficients(coeffs: &[OctaveCoefficients]) -> Result<Self> {
        Self::from_octaves(coeffs.iter().map(OctaveSpectrum::from_coefficients).collect::<Result<_>>()?)
    }

    /// Pyramid to octave `j_max`, then spectra at every octave.
    pub fn from_path(path: &SamplePath, bank: &WaveletBank, j_max: u32) -> Result<Self> {
        Self::from_coefficients(&pyramid(path, bank, j_max)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn octaves(&self) -> &[OctaveSpectrum] {
        &self.octaves
    }

    pub fn octave(&self, j: u32) -> Option<&OctaveSpectrum> {
        self.octaves.iter().find(|o| o.octave == j)
    }

    pub fn octave_numbers(&self) -> Vec<u32> {
        self.octaves.iter().map(|o| o.octave).collect()
    }
}

/// One `(j, q)` row of the logscale diagram. `None` marks a nonpositive value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogscaleRow {
    pub octave: u32,
    /// 1-based component / eigenvalue rank.
    pub q: usize,
    pub log2_lambda: Option<f64>,
    pub log2_diag: Option<f64>,
    pub k_count: usize,
}

impl LogscaleRow {
    pub fn flagged(&self) -> bool {
        self.log2_lambda.is_none() || self.log2_diag.is_none()
    }
}

fn positive_log2(v: f64) -> Option<f64> {
    (v > 0.0).then(|| v.log2())
}

pub fn logscale_diagram(spectrum: &WaveletSpectrum) -> Vec<LogscaleRow> {
    spectrum
        .octaves
        .iter()
        .flat_map(|o| {
            (0..spectrum.n).map(move |q| LogscaleRow {
                octave: o.octave,
                q: q + 1,
                log2_lambda: positive_log2(o.eigvals[q]),
                log2_diag: positive_log2(o.w[(q, q)]),
                k_count: o.k_count,
            })
        })
        .collect()
}

pub const LOGSCALE_HEADER: &str = "j\tq\tlog2_lambda\tlog2_diag\tK";

/// TSV form; nonpositive entries are written as `NA`.
pub fn logscale_tsv(rows: &[LogscaleRow]) -> String {
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(LOGSCALE_HEADER);
    out.push('\n');
    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.16e}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.octave,
            r.q,
            fmt(r.log2_lambda),
            fmt(r.log2_diag),
            r.k_count
        );
    }
    out
}

/// `|⟨u, p⟩| / (‖u‖ ‖p‖)`.
pub fn alignment(u: &DVector<f64>, p: &DVector<f64>) -> f64 {
    u.dot(p).abs() / (u.norm() * p.norm())
}
