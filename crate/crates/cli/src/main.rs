//! `ofbm` command-line frontend.
//!
//! Exit codes: 0 success, 2 validation, 3 numerical failure, 4 I/O.
//! Failures print one JSON object on stderr: `{"error":CLASS,"message":TEXT}`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ofbm::estimator::{aggregate_estimate, interleave_subtraces, resolve_octaves, Aggregation, UpperOctave, DEFAULT_J1};
use ofbm::io::{read_json, read_path, write_json, write_path};
use ofbm::montecarlo::{run, McConfig};
use ofbm::par::available_workers;
use ofbm::spectrum::{logscale_diagram, logscale_tsv};
use ofbm::wavelet::make_bank;
use ofbm::{build_plan, synthesize, Error, ErrorClass, OfbmSpec, RegressionWeights, Result, SamplePath, WaveletSpectrum, WaveletVariant, WeightPolicy};

#[derive(Parser)]
#[command(name = "ofbm", version, about = "Operator fractional Brownian motion: synthesis and wavelet eigenvalue Hurst estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one sample path and write it as CSV.
    Synth(SynthArgs),
    /// Estimate Hurst eigenvalues of one CSV path.
    Analyze(AnalyzeArgs),
    /// Median-of-subtraces estimate over several CSV paths.
    MedianAnalyze(MedianArgs),
    /// Run a Monte Carlo experiment.
    Mc(McArgs),
    /// Print Daubechies filter taps.
    Filters(FilterArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Model specification (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Number of samples ν (time points, including B(0) = 0).
    #[arg(long)]
    nu: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct Estimation {
    /// Lower regression octave.
    #[arg(long, default_value_t = DEFAULT_J1)]
    j1: u32,
    /// Upper regression octave: `auto` or an integer.
    #[arg(long, default_value = "auto")]
    j2: UpperOctave,
    /// Number of vanishing moments N_ψ.
    #[arg(long, default_value_t = 2)]
    nmom: usize,
    /// Filter variant: `la` (least asymmetric) or `ep` (extremal phase).
    #[arg(long, default_value = "la")]
    variant: WaveletVariant,
    /// Regression weight policy: `uniform` or `nu-over-2j`.
    #[arg(long, default_value = "nu-over-2j")]
    b: WeightPolicy,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input CSV (rows are time, columns are components).
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    est: Estimation,
    /// Estimates JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Logscale diagram TSV output.
    #[arg(long)]
    tsv: Option<PathBuf>,
    /// Accepted for interface uniformity; analysis is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct MedianArgs {
    /// Glob pattern selecting the subtrace CSV files.
    #[arg(long)]
    inputs: String,
    /// Additionally split every input into this many interleaved subtraces.
    #[arg(long)]
    split: Option<usize>,
    /// Combine per-subtrace log statistics by mean instead of median.
    #[arg(long)]
    mean: bool,
    #[command(flatten)]
    est: Estimation,
    /// Estimates JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Accepted for interface uniformity; analysis is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct McArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the number of replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Summary JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Per-replication CSV output.
    #[arg(long)]
    raw: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long, default_value_t = 2)]
    nmom: usize,
    #[arg(long, default_value = "la")]
    variant: WaveletVariant,
    /// Print the high-pass taps instead of the low-pass taps.
    #[arg(long)]
    highpass: bool,
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    if args.nu < 2 {
        return Err(Error::invalid(format!("--nu must be at least 2, got {}", args.nu)));
    }
    let spec: OfbmSpec = read_json(&args.config)?;
    for w in spec.theory_warnings() {
        log::warn!("{w}");
    }
    let plan = build_plan(&spec, args.nu)?;
    let path = synthesize(&plan, args.seed);
    write_path(&args.out, &path)
}

fn weights_for(nu: usize, n: usize, est: &Estimation) -> Result<(ofbm::WaveletBank, RegressionWeights)> {
    let bank = make_bank(est.nmom, est.variant)?;
    let (j1, j2) = resolve_octaves(nu, &bank, n, est.j1, est.j2)?;
    let weights = RegressionWeights::from_policy(j1, j2, est.b, nu)?;
    Ok((bank, weights))
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    let path = read_path(&args.input)?;
    let (bank, weights) = weights_for(path.nu(), path.n(), &args.est)?;
    let spectrum = WaveletSpectrum::from_path(&path, &bank, weights.j2)?;
    let estimates = ofbm::estimator::estimate(&spectrum, &weights)?;
    write_json(&args.out, &estimates.to_document())?;
    if let Some(tsv) = &args.tsv {
        std::fs::write(tsv, logscale_tsv(&logscale_diagram(&spectrum))).map_err(|e| Error::io(tsv, e))?;
    }
    Ok(())
}

fn expand_inputs(pattern: &str) -> Result<Vec<PathBuf>> {
    let entries = glob::glob(pattern).map_err(|e| Error::invalid(format!("bad glob '{pattern}': {e}")))?;
    let mut files = Vec::new();
    for entry in entries {
        match entry {
            Ok(p) => files.push(p),
            Err(e) => return Err(Error::io(e.path(), std::io::Error::other(e.to_string()))),
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::invalid(format!("--inputs '{pattern}' matched no files")));
    }
    Ok(files)
}

fn cmd_median_analyze(args: &MedianArgs) -> Result<()> {
    let files = expand_inputs(&args.inputs)?;
    let mut traces: Vec<SamplePath> = Vec::new();
    for f in &files {
        let p = read_path(f)?;
        match args.split {
            Some(m) => traces.extend(interleave_subtraces(&p, m)?),
            None => traces.push(p),
        }
    }
    let n = traces[0].n();
    if let Some((i, t)) = traces.iter().enumerate().find(|(_, t)| t.n() != n) {
        return Err(Error::invalid(format!("subtrace {i} has {} columns but subtrace 0 has {n}", t.n())));
    }
    let nu = traces.iter().map(SamplePath::nu).min().unwrap_or(0);
    let (bank, weights) = weights_for(nu, n, &args.est)?;
    let spectra = traces
        .iter()
        .map(|t| WaveletSpectrum::from_path(t, &bank, weights.j2))
        .collect::<Result<Vec<_>>>()?;
    let how = if args.mean { Aggregation::Mean } else { Aggregation::Median };
    let estimates = aggregate_estimate(&spectra, &weights, how)?;
    write_json(&args.out, &estimates.to_document())
}

fn cmd_mc(args: &McArgs) -> Result<()> {
    let mut config: McConfig = read_json(&args.config)?;
    if let Some(r) = args.reps {
        config.reps = r;
    }
    if let Some(s) = args.seed {
        config.base_seed = s;
    }
    let workers = args.workers.unwrap_or_else(available_workers);
    if workers == 0 {
        return Err(Error::invalid("--workers must be at least 1"));
    }
    let result = run(&config, workers)?;
    write_json(&args.out, &result.summary)?;
    if let Some(raw) = &args.raw {
        std::fs::write(raw, result.raw_csv()).map_err(|e| Error::io(raw, e))?;
    }
    Ok(())
}

fn cmd_filters(args: &FilterArgs) -> Result<()> {
    let bank = make_bank(args.nmom, args.variant)?;
    let taps = if args.highpass { bank.highpass() } else { bank.lowpass() };
    let mut out = String::new();
    for t in taps {
        out.push_str(&format!("{t:.16e}\n"));
    }
    print!("{out}");
    Ok(())
}

fn report(err: &Error) -> ExitCode {
    let (label, code) = match err.class() {
        ErrorClass::Validation => ("validation", 2),
        ErrorClass::Numerical => ("numerical", 3),
        ErrorClass::Io => ("io", 4),
    };
    let line = serde_json::json!({ "error": label, "message": err.to_string() });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::MedianAnalyze(a) => cmd_median_analyze(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Filters(a) => cmd_filters(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
