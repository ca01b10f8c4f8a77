//! `nmfcov`: generate datasets, run samplers, compute coverage metrics and
//! reproduce the full experiment grid.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use nmfcov_core::coverage::{
    epsilon_grid, max_dist, mean_dist, pairwise_distances, persistence_curve_on_grid, summarize_curves,
};
use nmfcov_core::datasets::{by_name, Dataset, DEFAULT_SIGMA};
use nmfcov_core::diagnostics::{chain_iat, iat, likelihood_trace, IatTrace};
use nmfcov_core::harness::{
    emit_persistence, emit_tables, run_experiment_with_progress, ExperimentConfig, Profile, Report,
};
use nmfcov_core::model::ModelParams;
use nmfcov_core::optimizers::OptimizerConfig;
use nmfcov_core::rng::derive_seed;
use nmfcov_core::samplers::{
    all_modes_baseline, filter_restarts, gibbs_chain, hmc_chain, one_mode_baseline, random_restarts, HmcConfig,
};
use nmfcov_core::{Error, Method, Measure, SampleChain};

const WORKERS_ENV: &str = "NMFCOV_WORKERS";

/// Config errors and anything else that stops a command before it finishes.
const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

#[derive(Parser)]
#[command(name = "nmfcov", version, about = "Coverage diagnostics for Bayesian NMF samplers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a dataset bundle (X, rank, solutions, optional noisy copy) as JSON.
    GenData(GenDataArgs),
    /// Run one sampler on a dataset bundle and write the chain as JSON lines.
    Sample(SampleArgs),
    /// Likelihood, IAT and distance summaries of one chain, as JSON on stdout.
    Metrics(MetricsArgs),
    /// Persistent covering-number curve of one chain, as CSV.
    Cover(CoverArgs),
    /// Re-render tables and curves from an existing report.json.
    Report(ReportArgs),
    /// Run the full dataset × method × repetition grid.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// unique, two_modes, infinite, or a `_large` variant.
    #[arg(long)]
    dataset: String,
    /// Add N(0, σ²) noise to a copy of X; 0 leaves the data clean.
    #[arg(long, default_value_t = DEFAULT_SIGMA)]
    sigma: f64,
    /// Seed for the embedding of large variants and for the noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Dataset bundle from `gen-data`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise level assumed by the model and the baselines. Defaults to the
    /// bundle's noise level, or 0.01 for clean bundles.
    #[arg(long)]
    sigma: Option<f64>,
    /// Gibbs chain (JSON lines) that sets the threshold for filtered restarts.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    sigma: Option<f64>,
    /// Distances use the first `limit` samples.
    #[arg(long, default_value_t = 1000)]
    limit: usize,
    #[arg(long, default_value = "entries", value_parser = parse_iat_trace)]
    iat_trace: IatTrace,
}

#[derive(Args)]
struct CoverArgs {
    #[arg(long)]
    chain: PathBuf,
    /// `angle` or `l1`.
    #[arg(long, default_value = "angle", value_parser = parse_measure)]
    measure: Measure,
    #[arg(long, default_value_t = 100)]
    n_eps: usize,
    #[arg(long, default_value_t = 1000)]
    limit: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json written by `reproduce`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long, default_value = "desk", value_parser = parse_profile)]
    profile: Profile,
    /// JSON config; replaces the profile. Flags below still override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "nmfcov-out")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    datasets: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    n_restarts: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    coverage_limit: Option<usize>,
    #[arg(long)]
    n_eps: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).map_err(|e| e.to_string())
}

fn parse_measure(s: &str) -> Result<Measure, String> {
    Measure::parse(s).map_err(|e| e.to_string())
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    Profile::parse(s).map_err(|e| e.to_string())
}

fn parse_iat_trace(s: &str) -> Result<IatTrace, String> {
    match s {
        "entries" => Ok(IatTrace::Entries),
        "log_likelihood" => Ok(IatTrace::LogLikelihood),
        other => Err(format!("unknown IAT trace {other:?} (entries, log_likelihood)")),
    }
}

enum Outcome {
    Done,
    Partial,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match run(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(EXIT_PARTIAL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn configure_workers() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{WORKERS_ENV} must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(command: Command) -> anyhow::Result<Outcome> {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::Sample(a) => sample(a),
        Command::Metrics(a) => metrics(a),
        Command::Cover(a) => cover(a),
        Command::Report(a) => report(a),
        Command::Reproduce(a) => reproduce(a),
    }
}

fn config_err(e: impl std::fmt::Display) -> anyhow::Error {
    anyhow::anyhow!("invalid configuration: {e}")
}

fn load_dataset(path: &Path) -> anyhow::Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Dataset::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_chain(path: &Path) -> anyhow::Result<SampleChain> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    SampleChain::read_jsonl(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

fn model_sigma(d: &Dataset, flag: Option<f64>) -> f64 {
    flag.unwrap_or(if d.sigma_noise > 0.0 { d.sigma_noise } else { DEFAULT_SIGMA })
}

fn gen_data(a: GenDataArgs) -> anyhow::Result<Outcome> {
    let mut d = by_name(&a.dataset, a.seed).map_err(config_err)?;
    if a.sigma > 0.0 {
        d = d.with_noise(a.sigma, derive_seed(a.seed, &[&a.dataset, "noise"]))?;
    }
    fs::write(&a.out, d.to_json()?).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(Outcome::Done)
}

fn sample(a: SampleArgs) -> anyhow::Result<Outcome> {
    if a.n == 0 {
        return Err(config_err("--n must be at least 1"));
    }
    let d = load_dataset(&a.data)?;
    let sigma = model_sigma(&d, a.sigma);
    let params = ModelParams::with_sigma(sigma).map_err(config_err)?;
    let x = d.observed();
    let opt = OptimizerConfig::default();
    let init = || -> anyhow::Result<_> {
        let seed = derive_seed(a.seed, &["init"]);
        let c = one_mode_baseline(&d, d.structure.default_mode(), sigma, 1, seed)?;
        Ok(c.samples.into_iter().next().expect("one sample"))
    };
    let chain = match a.method {
        Method::OneMode => one_mode_baseline(&d, d.structure.default_mode(), sigma, a.n, a.seed)?,
        Method::AllModes => all_modes_baseline(&d, sigma, a.n, a.seed)?,
        Method::Gibbs => gibbs_chain(x, &params, &init()?, a.n, a.seed)?,
        Method::Hmc => hmc_chain(x, &params, &init()?, a.n, &HmcConfig::default(), a.seed)?,
        Method::RandomRestarts => random_restarts(x, d.rank, a.n, a.seed, &opt)?,
        Method::FilteredRestarts => {
            let reference = a
                .reference
                .as_ref()
                .ok_or_else(|| config_err("filtered_restarts needs --reference <gibbs chain>"))?;
            let gibbs = load_chain(reference)?;
            let restarts = random_restarts(x, d.rank, a.n, a.seed, &opt)?;
            filter_restarts(&restarts, &gibbs, x)?
        }
    };
    let chain = chain.with_dataset(&d.id);
    let file = fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut out = BufWriter::new(file);
    chain.write_jsonl(&mut out, x)?;
    out.flush()?;
    Ok(Outcome::Done)
}

fn metrics(a: MetricsArgs) -> anyhow::Result<Outcome> {
    let d = load_dataset(&a.data)?;
    let chain = load_chain(&a.chain)?;
    let sigma2 = model_sigma(&d, a.sigma).powi(2);
    let x = d.observed();
    let trace = likelihood_trace(&chain, x, sigma2)?;
    let (p25, p50, p75) = trace.quartiles();
    let mut out = BTreeMap::new();
    out.insert("n_samples".to_string(), chain.len() as f64);
    out.insert("mean_log_likelihood".to_string(), trace.mean());
    out.insert("log_likelihood_p25".to_string(), p25);
    out.insert("log_likelihood_p50".to_string(), p50);
    out.insert("log_likelihood_p75".to_string(), p75);
    let mut partial = false;
    for (key, value) in [
        ("iat", chain_iat(&chain, x, sigma2, a.iat_trace)),
        ("iat_loglik", iat(&trace)),
    ] {
        match value {
            Ok(v) => {
                out.insert(key.to_string(), v);
            }
            Err(e @ Error::TooShort { .. }) => {
                eprintln!("warning: {key}: {e}");
                partial = true;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let head: Vec<_> = chain.samples.iter().take(a.limit).cloned().collect();
    for measure in Measure::ALL {
        let dm = pairwise_distances(&head, measure)?;
        out.insert(format!("max_dist_{}", measure.name()), max_dist(&dm));
        out.insert(format!("mean_dist_{}", measure.name()), mean_dist(&dm));
    }
    for (k, v) in &chain.meta.extra {
        out.insert(k.clone(), *v);
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(if partial { Outcome::Partial } else { Outcome::Done })
}

fn cover(a: CoverArgs) -> anyhow::Result<Outcome> {
    if a.n_eps < 2 || a.limit == 0 {
        return Err(config_err("--n-eps must be at least 2 and --limit at least 1"));
    }
    let chain = load_chain(&a.chain)?;
    let head: Vec<_> = chain.samples.iter().take(a.limit).cloned().collect();
    let dm = pairwise_distances(&head, a.measure)?;
    let curve = persistence_curve_on_grid(&dm, &epsilon_grid(max_dist(&dm), a.n_eps));
    let summary = summarize_curves(&[curve])?;
    fs::write(&a.out, summary.to_csv()).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(Outcome::Done)
}

fn report(a: ReportArgs) -> anyhow::Result<Outcome> {
    let text = fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let report = Report::from_json(&text).with_context(|| format!("parsing {}", a.input.display()))?;
    emit_tables(&report, &a.out)?;
    emit_persistence(&report, &a.out)?;
    Ok(if report.is_partial() { Outcome::Partial } else { Outcome::Done })
}

fn reproduce_config(a: &ReproduceArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json(&text).map_err(config_err)?
        }
        None => ExperimentConfig::profile(a.profile, 0),
    };
    if let Some(seed) = a.seed {
        cfg.master_seed = seed;
    }
    if let Some(v) = &a.datasets {
        cfg.datasets = v.clone();
    }
    if let Some(v) = &a.methods {
        cfg.methods = v.clone();
    }
    if let Some(v) = a.n_samples {
        cfg.n_samples = v;
    }
    if a.n_restarts.is_some() {
        cfg.n_restarts = a.n_restarts;
    }
    if let Some(v) = a.repetitions {
        cfg.repetitions = v;
    }
    if let Some(v) = a.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = a.coverage_limit {
        cfg.coverage_limit = v;
    }
    if let Some(v) = a.n_eps {
        cfg.n_eps = v;
    }
    cfg.output_dir = Some(a.out.to_string_lossy().into_owned());
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn reproduce(a: ReproduceArgs) -> anyhow::Result<Outcome> {
    let cfg = reproduce_config(&a)?;
    let quiet = a.quiet;
    let report = run_experiment_with_progress(&cfg, |msg| {
        if !quiet {
            eprintln!("{msg}");
        }
    })
    .map_err(|e| match e {
        Error::Config(_) => config_err(e),
        other => other.into(),
    })?;
    if report.is_partial() {
        for c in report.cells.iter().filter(|c| !c.errors.is_empty()) {
            eprintln!(
                "warning: {}/{}/rep {}: {}",
                c.dataset,
                c.method,
                c.repetition,
                c.errors.join("; ")
            );
        }
        for e in &report.errors {
            eprintln!("warning: {e}");
        }
    }
    if !quiet {
        eprintln!("wrote {}", a.out.display());
    }
    if report.is_partial() {
        return Ok(Outcome::Partial);
    }
    Ok(Outcome::Done)
}
