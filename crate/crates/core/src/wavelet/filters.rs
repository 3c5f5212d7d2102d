//! Daubechies filters by spectral factorization of the half-band polynomial.
//!
//! `|H(ω)|² = 2 cos^{2N}(ω/2) Q(sin²(ω/2))` with
//! `Q(y) = Σ_{k<N} C(N-1+k, k) y^k`. Each root `y_r` of `Q` gives a pair of
//! zeros `ρ, 1/ρ` of `ζ + 1/ζ = 2 - 4y_r`; choosing one zero from each pair
//! yields a valid orthogonal filter. Extremal phase keeps every `|ρ| < 1`
//! factor `(1 - ρζ)`; least asymmetric searches all choices for the phase
//! closest to linear.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_MOMENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WaveletVariant {
    #[serde(rename = "ep")]
    ExtremalPhase,
    #[serde(rename = "la")]
    LeastAsymmetric,
}

impl std::str::FromStr for WaveletVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ep" | "extremal-phase" => Ok(Self::ExtremalPhase),
            "la" | "least-asymmetric" => Ok(Self::LeastAsymmetric),
            other => Err(Error::invalid(format!("unknown wavelet variant '{other}' (expected la or ep)"))),
        }
    }
}

/// Orthogonal Daubechies analysis filter pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBank {
    n_moments: usize,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
    variant: WaveletVariant,
}

/// Largest deviations from the filter-pair identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BankResiduals {
    /// `|Σh - √2|`
    pub lowpass_sum: f64,
    /// `|Σg|`
    pub highpass_sum: f64,
    /// `max_m |Σ_k h_k h_{k+2m} - δ_m|`
    pub orthonormality: f64,
    /// `max_p |Σ k^p g_k| / Σ |k^p g_k|`, `p < N`
    pub vanishing_moments: f64,
    /// `max_k |g_k - (-1)^k h_{L-1-k}|`
    pub quadrature_mirror: f64,
}

impl WaveletBank {
    pub fn n_moments(&self) -> usize {
        self.n_moments
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    pub fn variant(&self) -> WaveletVariant {
        self.variant
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }

    pub fn residuals(&self) -> BankResiduals {
        let h = &self.lowpass;
        let g = &self.highpass;
        let l = h.len();
        let lowpass_sum = (h.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs();
        let highpass_sum = g.iter().sum::<f64>().abs();
        let mut orthonormality = 0.0f64;
        for m in 0..l / 2 {
            let s: f64 = (0..l - 2 * m).map(|k| h[k] * h[k + 2 * m]).sum();
            let target = if m == 0 { 1.0 } else { 0.0 };
            orthonormality = orthonormality.max((s - target).abs());
        }
        let mut vanishing_moments = 0.0f64;
        for p in 0..self.n_moments {
            let terms: Vec<f64> = g.iter().enumerate().map(|(k, gk)| (k as f64).powi(p as i32) * gk).collect();
            let sum: f64 = terms.iter().sum();
            let mag: f64 = terms.iter().map(|t| t.abs()).sum();
            vanishing_moments = vanishing_moments.max(sum.abs() / mag);
        }
        let quadrature_mirror = (0..l)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                (g[k] - sign * h[l - 1 - k]).abs()
            })
            .fold(0.0, f64::max);
        BankResiduals { lowpass_sum, highpass_sum, orthonormality, vanishing_moments, quadrature_mirror }
    }
}

/// Builds the Daubechies filter pair with `n_moments` vanishing moments.
pub fn make_bank(n_moments: usize, variant: WaveletVariant) -> Result<WaveletBank> {
    if !(1..=MAX_MOMENTS).contains(&n_moments) {
        return Err(Error::invalid(format!(
            "unsupported number of vanishing moments {n_moments} (expected 1..={MAX_MOMENTS})"
        )));
    }
    let groups = zero_groups(n_moments)?;
    let choice = match variant {
        WaveletVariant::ExtremalPhase => 0,
        WaveletVariant::LeastAsymmetric => least_asymmetric_choice(&groups),
    };
    let lowpass = expand_filter(n_moments, &groups, choice);
    let l = lowpass.len();
    let highpass = (0..l)
        .map(|k| if k % 2 == 0 { lowpass[l - 1 - k] } else { -lowpass[l - 1 - k] })
        .collect();
    Ok(WaveletBank { n_moments, lowpass, highpass, variant })
}

/// Zeros `ρ` (|ρ| < 1) of the factor `L(ζ)`, grouped so that a conjugate
/// pair is flipped as a unit.
#[derive(Debug, Clone)]
enum ZeroGroup {
    Real(f64),
    Pair(Complex64),
}

/// Coefficients of `Q(y)` in increasing degree.
pub(crate) fn halfband_coefficients(n_moments: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_moments);
    let mut c = 1.0f64;
    for k in 0..n_moments {
        if k > 0 {
            c = c * (n_moments - 1 + k) as f64 / k as f64;
        }
        out.push(c);
    }
    out
}

fn eval_poly(coeffs: &[f64], x: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Roots of `Q` via companion-matrix eigenvalues, Newton polished.
pub(crate) fn halfband_roots(n_moments: usize) -> Result<Vec<Complex64>> {
    let coeffs = halfband_coefficients(n_moments);
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[deg];
    let mut companion = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        companion[(i, deg - 1)] = -coeffs[i] / lead;
    }
    let mut roots: Vec<Complex64> = companion.complex_eigenvalues().iter().copied().collect();
    for r in roots.iter_mut() {
        for _ in 0..8 {
            let (p, dp) = eval_poly(&coeffs, *r);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            *r -= step;
            if step.norm() <= 1e-17 * r.norm() {
                break;
            }
        }
    }
    for r in &roots {
        let (p, _) = eval_poly(&coeffs, *r);
        let scale: f64 = coeffs.iter().enumerate().map(|(k, c)| c * r.norm().powi(k as i32)).sum();
        if !(p.norm() <= 1e-10 * scale) {
            return Err(Error::Factorization(format!("half-band root {r} did not converge")));
        }
    }
    Ok(roots)
}

fn zero_groups(n_moments: usize) -> Result<Vec<ZeroGroup>> {
    let roots = halfband_roots(n_moments)?;
    let mut groups = Vec::new();
    let mut pending: Vec<Complex64> = Vec::new();
    for y in roots {
        // ζ + 1/ζ = b, take the zero inside the unit circle.
        let b = Complex64::new(2.0, 0.0) - y * 4.0;
        let disc = (b * b - 4.0).sqrt();
        let z1 = (b + disc) * 0.5;
        let z2 = (b - disc) * 0.5;
        let rho = if z1.norm() < z2.norm() { z1 } else { z2 };
        if y.im.abs() <= 1e-9 * y.norm().max(1.0) {
            groups.push(ZeroGroup::Real(rho.re));
        } else if y.im > 0.0 {
            pending.push(rho);
        }
    }
    // Each upper-half-plane y root stands for its conjugate pair.
    groups.extend(pending.into_iter().map(ZeroGroup::Pair));
    // Deterministic order, independent of the eigensolver's.
    groups.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal));
    Ok(groups)
}

fn key(g: &ZeroGroup) -> (f64, f64) {
    match g {
        ZeroGroup::Real(r) => (*r, 0.0),
        ZeroGroup::Pair(z) => (z.re, z.im.abs()),
    }
}

/// One linear factor of `L(ζ)`: `(1 - ρζ)`, or `(ζ - ρ)` when flipped.
#[derive(Debug, Clone, Copy)]
struct Factor {
    rho: Complex64,
    flipped: bool,
}

impl Factor {
    /// Coefficients of `ζ^0, ζ^1`.
    fn coefficients(self) -> [Complex64; 2] {
        let one = Complex64::new(1.0, 0.0);
        if self.flipped {
            [-self.rho, one]
        } else {
            [one, -self.rho]
        }
    }

    /// Continuous phase on `ζ = e^{-iω}`, `ω ∈ (0, π)`.
    fn phase(self, omega: f64) -> f64 {
        let one = Complex64::new(1.0, 0.0);
        if self.flipped {
            // ζ - ρ = ζ (1 - ρ ζ̄)
            -omega + (one - self.rho * Complex64::from_polar(1.0, omega)).arg()
        } else {
            (one - self.rho * Complex64::from_polar(1.0, -omega)).arg()
        }
    }
}

fn factors(groups: &[ZeroGroup], mask: usize) -> Vec<Factor> {
    let mut out = Vec::new();
    for (bit, g) in groups.iter().enumerate() {
        let flipped = mask >> bit & 1 == 1;
        match g {
            ZeroGroup::Real(r) => out.push(Factor { rho: Complex64::new(*r, 0.0), flipped }),
            ZeroGroup::Pair(z) => {
                out.push(Factor { rho: *z, flipped });
                out.push(Factor { rho: z.conj(), flipped });
            }
        }
    }
    out
}

fn expand_filter(n_moments: usize, groups: &[ZeroGroup], mask: usize) -> Vec<f64> {
    let one = Complex64::new(1.0, 0.0);
    let mut lin: Vec<[Complex64; 2]> = factors(groups, mask).into_iter().map(Factor::coefficients).collect();
    lin.extend(std::iter::repeat_n([one, one], n_moments));
    let mut poly = vec![one];
    for f in lin {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (k, c) in poly.iter().enumerate() {
            next[k] += c * f[0];
            next[k + 1] += c * f[1];
        }
        poly = next;
    }
    let taps: Vec<f64> = poly.iter().map(|c| c.re).collect();
    let sum: f64 = taps.iter().sum();
    let scale = std::f64::consts::SQRT_2 / sum;
    taps.into_iter().map(|t| t * scale).collect()
}

fn factor_phase(groups: &[ZeroGroup], mask: usize, omega: f64) -> f64 {
    factors(groups, mask).into_iter().map(|f| f.phase(omega)).sum()
}

/// Flip mask whose phase has the smallest least-squares deviation from linear.
fn least_asymmetric_choice(groups: &[ZeroGroup]) -> usize {
    const GRID: usize = 512;
    let omegas: Vec<f64> = (0..GRID).map(|m| std::f64::consts::PI * (m as f64 + 0.5) / GRID as f64).collect();
    let sxx: f64 = omegas.iter().map(|w| w * w).sum();
    let mut best = (0usize, f64::INFINITY);
    for mask in 0..(1usize << groups.len()) {
        let phases: Vec<f64> = omegas.iter().map(|&w| factor_phase(groups, mask, w)).collect();
        let slope = omegas.iter().zip(&phases).map(|(w, p)| w * p).sum::<f64>() / sxx;
        let cost: f64 = omegas.iter().zip(&phases).map(|(w, p)| (p - slope * w).powi(2)).sum();
        // Mirror-image choices tie; keep the earliest (closest to extremal phase).
        if cost < best.1 * (1.0 - 1e-9) {
            best = (mask, cost);
        }
    }
    best.0
}
