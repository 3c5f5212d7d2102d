//! Moment aggregation, percentile bootstrap and cross-covariances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;

/// One-pass central moments (Terriberry's update of Welford's algorithm).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2 - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::default();
        xs.iter().for_each(|x| m.push(*x));
        m
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased standard deviation; `None` below two samples.
    pub fn std(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.m2 / (self.count as f64 - 1.0)).sqrt())
    }

    /// Sample skewness `g₁ = √R M₃ / M₂^{3/2}`.
    pub fn skewness(&self) -> Option<f64> {
        (self.count >= 2 && self.m2 > 0.0).then(|| (self.count as f64).sqrt() * self.m3 / self.m2.powf(1.5))
    }

    /// Sample excess kurtosis `g₂ = R M₄ / M₂² - 3`.
    pub fn excess_kurtosis(&self) -> Option<f64> {
        (self.count >= 2 && self.m2 > 0.0).then(|| self.count as f64 * self.m4 / (self.m2 * self.m2) - 3.0)
    }
}

/// Minimum sample count for a bootstrap interval.
pub const BOOTSTRAP_MIN_SAMPLES: usize = 10;

/// Confidence interval bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Linear-interpolation quantile (Hyndman & Fan type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval for the mean; `None` when fewer than
/// [`BOOTSTRAP_MIN_SAMPLES`] samples or an invalid level/resample count.
pub fn bootstrap_ci(samples: &[f64], level: f64, resamples: usize, seed: u64) -> Option<Interval> {
    let r = samples.len();
    if r < BOOTSTRAP_MIN_SAMPLES || resamples == 0 || !(level > 0.0 && level < 1.0) {
        return None;
    }
    // Shifted means are exact for constant data.
    let shift = samples[0];
    let mut rng = rng_from_seed(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let s: f64 = (0..r).map(|_| samples[rng.random_range(0..r)] - shift).sum();
            shift + s / r as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Some(Interval { lo: quantile_sorted(&means, alpha / 2.0), hi: quantile_sorted(&means, 1.0 - alpha / 2.0) })
}

/// Unbiased sample covariance of the columns of `rows` (R rows of length n).
pub fn cross_covariances(rows: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let r = rows.len();
    if r < 2 {
        return None;
    }
    let n = rows[0].len();
    let means: Vec<f64> = (0..n).map(|q| rows.iter().map(|x| x[q]).sum::<f64>() / r as f64).collect();
    let mut cov = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let s: f64 = rows.iter().map(|x| (x[a] - means[a]) * (x[b] - means[b])).sum::<f64>() / (r as f64 - 1.0);
            cov[a][b] = s;
            cov[b][a] = s;
        }
    }
    Some(cov)
}

/// Ordinary least-squares slope of `y` on `x`; `None` with fewer than two points.
pub fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
