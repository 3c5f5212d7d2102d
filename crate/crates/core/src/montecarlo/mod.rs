//! Replication engine: synthesize, analyze and estimate `R` paths per sample
//! size, then summarize bias, spread, shape, cross-covariance and bootstrap
//! intervals of both estimators.
//!
//! Replication `r` at size `ν` uses seed [`replication_seed`]`(base, ν, r)`
//! and results are gathered in `(ν, r)` order, so summaries do not depend on
//! the worker count.

mod stats;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use stats::{bootstrap_ci, cross_covariances, ols_slope, quantile_sorted, Interval, Moments, BOOTSTRAP_MIN_SAMPLES};

use crate::error::{Error, Result};
use crate::estimator::{self, resolve_octaves, RegressionWeights, UpperOctave, WeightPolicy, DEFAULT_J1};
use crate::model::OfbmSpec;
use crate::par::map_indexed;
use crate::rng::{replication_seed, stream_seed};
use crate::spectrum::WaveletSpectrum;
use crate::synthesis::{build_plan, synthesize, SynthesisPlan};
use crate::wavelet::{make_bank, WaveletBank, WaveletVariant};

fn default_n_moments() -> usize {
    2
}
fn default_variant() -> WaveletVariant {
    WaveletVariant::LeastAsymmetric
}
fn default_j1() -> u32 {
    DEFAULT_J1
}
fn default_weights() -> WeightPolicy {
    WeightPolicy::NuOver2j
}
fn default_bootstrap() -> usize {
    1000
}
fn default_level() -> f64 {
    0.95
}

/// Monte Carlo experiment description (the `mc --config` payload).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub spec: OfbmSpec,
    pub nus: Vec<usize>,
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_n_moments")]
    pub n_moments: usize,
    #[serde(default = "default_variant")]
    pub variant: WaveletVariant,
    #[serde(default = "default_j1")]
    pub j1: u32,
    #[serde(default)]
    pub j2: UpperOctave,
    #[serde(default = "default_weights")]
    pub weights: WeightPolicy,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_b: usize,
    #[serde(default = "default_level")]
    pub ci_level: f64,
}

impl McConfig {
    pub fn new(spec: OfbmSpec, nus: Vec<usize>, reps: usize, base_seed: u64) -> Self {
        Self {
            spec,
            nus,
            reps,
            base_seed,
            n_moments: default_n_moments(),
            variant: default_variant(),
            j1: default_j1(),
            j2: UpperOctave::default(),
            weights: default_weights(),
            bootstrap_b: default_bootstrap(),
            ci_level: default_level(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        if self.nus.is_empty() {
            return Err(Error::invalid("nus must list at least one sample size"));
        }
        if self.nus.iter().any(|nu| !nu.is_power_of_two() || *nu < 2) {
            return Err(Error::invalid("sample sizes must be powers of two"));
        }
        if self.nus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sample sizes must be strictly ascending"));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::invalid("ci_level must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Which estimator a statistic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "multi")]
    Multivariate,
    #[serde(rename = "uni")]
    Univariate,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Multivariate => "multi",
            EstimatorKind::Univariate => "uni",
        }
    }
}

/// Estimates of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub nu: usize,
    pub rep: usize,
    pub seed: u64,
    pub h_multivariate: Vec<f64>,
    pub h_univariate: Vec<f64>,
    /// Eigenvalues and diagonal of `W(2^j)` for `j = 1..=j2`.
    pub eigvals: Vec<Vec<f64>>,
    pub diag: Vec<Vec<f64>>,
}

/// Distribution summary of one estimator component at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub q: usize,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub std: Option<f64>,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub ci: Option<Interval>,
}

/// `log₂` of Monte Carlo averages of `λ_q(W(2^j))` and `W(2^j)_qq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogscaleMean {
    pub j: u32,
    pub log2_mean_eig: Vec<f64>,
    pub log2_mean_diag: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuSummary {
    pub nu: usize,
    pub j1: u32,
    pub j2: u32,
    pub embed_len: usize,
    pub reps: usize,
    pub multivariate: Vec<EstimatorStats>,
    pub univariate: Vec<EstimatorStats>,
    pub covariance_multivariate: Option<Vec<Vec<f64>>>,
    pub covariance_univariate: Option<Vec<Vec<f64>>>,
    pub logscale: Vec<LogscaleMean>,
}

impl NuSummary {
    pub fn stats(&self, kind: EstimatorKind) -> &[EstimatorStats] {
        match kind {
            EstimatorKind::Multivariate => &self.multivariate,
            EstimatorKind::Univariate => &self.univariate,
        }
    }
}

/// Slope of `log₂ std(ĥ_q)` against `log₂ ν`, per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdDecay {
    pub multivariate: Vec<Option<f64>>,
    pub univariate: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub schema_version: u32,
    pub base_seed: u64,
    pub reps: usize,
    pub ci_level: f64,
    pub bootstrap_b: usize,
    pub truth: Vec<f64>,
    pub per_nu: Vec<NuSummary>,
    pub std_decay_slope: StdDecay,
}

impl McSummary {
    pub fn at(&self, nu: usize) -> Option<&NuSummary> {
        self.per_nu.iter().find(|s| s.nu == nu)
    }
}

/// Summary plus every replication's estimates.
#[derive(Debug, Clone)]
pub struct McRun {
    pub summary: McSummary,
    pub records: Vec<ReplicationRecord>,
}

pub const RAW_HEADER: &str = "nu,rep,estimator,q,h_hat";

impl McRun {
    /// Raw per-replication CSV, one row per (ν, r, estimator, q).
    pub fn raw_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(RAW_HEADER);
        out.push('\n');
        for r in &self.records {
            for (kind, values) in [(EstimatorKind::Multivariate, &r.h_multivariate), (EstimatorKind::Univariate, &r.h_univariate)] {
                for (q, h) in values.iter().enumerate() {
                    let _ = writeln!(out, "{},{},{},{},{:.16e}", r.nu, r.rep, kind.label(), q + 1, h);
                }
            }
        }
        out
    }

    pub fn estimates(&self, nu: usize, kind: EstimatorKind) -> Vec<Vec<f64>> {
        self.records
            .iter()
            .filter(|r| r.nu == nu)
            .map(|r| match kind {
                EstimatorKind::Multivariate => r.h_multivariate.clone(),
                EstimatorKind::Univariate => r.h_univariate.clone(),
            })
            .collect()
    }
}

/// Everything one replication needs, shared read-only across workers.
struct Stage {
    plan: SynthesisPlan,
    bank: WaveletBank,
    weights: RegressionWeights,
}

fn replicate(stage: &Stage, nu: usize, rep: usize, seed: u64) -> Result<ReplicationRecord> {
    let path = synthesize(&stage.plan, seed);
    let spectrum = WaveletSpectrum::from_path(&path, &stage.bank, stage.weights.j2)?;
    let est = estimator::estimate(&spectrum, &stage.weights)?;
    Ok(ReplicationRecord {
        nu,
        rep,
        seed,
        h_multivariate: est.h_multivariate,
        h_univariate: est.h_univariate,
        eigvals: spectrum.octaves().iter().map(|o| o.eigvals.clone()).collect(),
        diag: spectrum.octaves().iter().map(|o| o.w.diagonal().iter().copied().collect()).collect(),
    })
}

/// Runs one replication in isolation, e.g. to replay a logged failure.
pub fn replay(config: &McConfig, nu: usize, rep: usize) -> Result<ReplicationRecord> {
    let stage = prepare(config, nu)?;
    replicate(&stage, nu, rep, replication_seed(config.base_seed, nu, rep))
}

fn prepare(config: &McConfig, nu: usize) -> Result<Stage> {
    let bank = make_bank(config.n_moments, config.variant)?;
    let (j1, j2) = resolve_octaves(nu, &bank, config.spec.n(), config.j1, config.j2)?;
    let weights = RegressionWeights::from_policy(j1, j2, config.weights, nu)?;
    let plan = build_plan(&config.spec, nu)?;
    Ok(Stage { plan, bank, weights })
}

fn stats_for(
    records: &[&ReplicationRecord],
    kind: EstimatorKind,
    truth: &[f64],
    config: &McConfig,
    nu: usize,
) -> Vec<EstimatorStats> {
    truth
        .iter()
        .enumerate()
        .map(|(q, &h)| {
            let samples: Vec<f64> = records
                .iter()
                .map(|r| match kind {
                    EstimatorKind::Multivariate => r.h_multivariate[q],
                    EstimatorKind::Univariate => r.h_univariate[q],
                })
                .collect();
            let m = Moments::from_slice(&samples);
            let stream = (nu as u64) << 16 | (kind as u64) << 8 | q as u64;
            EstimatorStats {
                q: q + 1,
                truth: h,
                mean: m.mean(),
                bias: m.mean() - h,
                std: m.std(),
                skewness: m.skewness(),
                excess_kurtosis: m.excess_kurtosis(),
                ci: bootstrap_ci(&samples, config.ci_level, config.bootstrap_b, stream_seed(config.base_seed, stream)),
            }
        })
        .collect()
}

/// Runs the experiment with up to `workers` threads.
pub fn run(config: &McConfig, workers: usize) -> Result<McRun> {
    config.validate()?;
    let truth = config.spec.hurst().to_vec();
    let n = truth.len();
    let mut per_nu = Vec::with_capacity(config.nus.len());
    let mut records = Vec::with_capacity(config.nus.len() * config.reps);

    for &nu in &config.nus {
        let stage = prepare(config, nu)?;
        let results = map_indexed(workers, config.reps, |rep| {
            let seed = replication_seed(config.base_seed, nu, rep);
            replicate(&stage, nu, rep, seed)
                .map_err(|e| Error::Replication { nu, rep, seed, source: Box::new(e) })
        });
        let batch: Vec<ReplicationRecord> = results.into_iter().collect::<Result<_>>()?;
        let refs: Vec<&ReplicationRecord> = batch.iter().collect();

        let multi_rows: Vec<Vec<f64>> = batch.iter().map(|r| r.h_multivariate.clone()).collect();
        let uni_rows: Vec<Vec<f64>> = batch.iter().map(|r| r.h_univariate.clone()).collect();
        let j2 = stage.weights.j2;
        let logscale = (0..j2 as usize)
            .map(|jj| {
                let mean_of = |pick: &dyn Fn(&ReplicationRecord) -> &Vec<Vec<f64>>| -> Vec<f64> {
                    (0..n)
                        .map(|q| (batch.iter().map(|r| pick(r)[jj][q]).sum::<f64>() / batch.len() as f64).log2())
                        .collect()
                };
                LogscaleMean { j: jj as u32 + 1, log2_mean_eig: mean_of(&|r| &r.eigvals), log2_mean_diag: mean_of(&|r| &r.diag) }
            })
            .collect();

        per_nu.push(NuSummary {
            nu,
            j1: stage.weights.j1,
            j2,
            embed_len: stage.plan.embed_len(),
            reps: config.reps,
            multivariate: stats_for(&refs, EstimatorKind::Multivariate, &truth, config, nu),
            univariate: stats_for(&refs, EstimatorKind::Univariate, &truth, config, nu),
            covariance_multivariate: cross_covariances(&multi_rows),
            covariance_univariate: cross_covariances(&uni_rows),
            logscale,
        });
        records.extend(batch);
    }

    let decay = |kind: EstimatorKind| -> Vec<Option<f64>> {
        (0..n)
            .map(|q| {
                let pts: Vec<(f64, f64)> = per_nu
                    .iter()
                    .filter_map(|s| {
                        s.stats(kind)[q].std.filter(|v| *v > 0.0).map(|v| ((s.nu as f64).log2(), v.log2()))
                    })
                    .collect();
                ols_slope(&pts)
            })
            .collect()
    };
    let std_decay_slope = StdDecay { multivariate: decay(EstimatorKind::Multivariate), univariate: decay(EstimatorKind::Univariate) };

    Ok(McRun {
        summary: McSummary {
            schema_version: estimator::SCHEMA_VERSION,
            base_seed: config.base_seed,
            reps: config.reps,
            ci_level: config.ci_level,
            bootstrap_b: config.bootstrap_b,
            truth,
            per_nu,
            std_decay_slope,
        },
        records,
    })
}
