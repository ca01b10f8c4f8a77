use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::coverage::{epsilon_grid, max_dist, mean_dist, pairwise_prepared, persistence_curve_on_grid, summarize_curves, DistanceMatrix};
use crate::datasets::{by_name, Dataset};
use crate::diagnostics::{chain_iat, iat_values, likelihood_trace, posterior_trace};
use crate::error::{Error, Result};
use crate::factorization::Factorization;
use crate::model::ModelParams;
use crate::rng::{cell_seed, derive_seed};
use crate::samplers::{
    all_modes_baseline_with, filter_restarts, gibbs_chain, hmc_chain, one_mode_baseline_with, random_restarts,
    Method, SampleChain,
};
use crate::similarity::{Measure, PreparedBasis};

use super::config::ExperimentConfig;
use super::report::{
    emit_persistence, emit_tables, max_dist_metric, mean_dist_metric, CellResult, PersistenceEntry, Report,
    METRIC_IAT, METRIC_IAT_LOGLIK, METRIC_LOG_LIKELIHOOD, METRIC_LOG_POSTERIOR,
};

/// One repetition of one dataset: finished cells plus the column-normalized
/// bases of the first `coverage_limit` samples of each chain.
struct RepOutput {
    cells: Vec<CellResult>,
    bases: BTreeMap<Method, Vec<PreparedBasis>>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    run_experiment_with_progress(cfg, |_| {})
}

/// Runs every dataset × method × repetition cell. Only an invalid config or
/// a failure to write `output_dir` is an `Err`; everything else is recorded
/// in the report, which is then partial.
pub fn run_experiment_with_progress(cfg: &ExperimentConfig, progress: impl Fn(&str) + Sync) -> Result<Report> {
    cfg.validate()?;
    let mut report = Report::empty(cfg.clone());
    for name in &cfg.datasets {
        let base = match by_name(name, cfg.master_seed) {
            Ok(d) => d,
            Err(e) => {
                report.errors.push(format!("{name}: {e}"));
                continue;
            }
        };
        let mut reps: Vec<RepOutput> = (0..cfg.repetitions)
            .into_par_iter()
            .map(|rep| {
                let out = run_repetition(cfg, &base, rep);
                progress(&format!("{name}: repetition {} of {} sampled", rep + 1, cfg.repetitions));
                out
            })
            .collect();
        if cfg.metrics.distances || cfg.metrics.persistence {
            coverage_phase(cfg, name, &mut reps, &mut report);
            progress(&format!("{name}: coverage done"));
        }
        for &method in &cfg.methods {
            for rep in reps.iter_mut() {
                if let Some(i) = rep.cells.iter().position(|c| c.method == method) {
                    report.cells.push(rep.cells.swap_remove(i));
                }
            }
        }
    }
    report.summarize();
    if let Some(dir) = &cfg.output_dir {
        emit_tables(&report, Path::new(dir))?;
        emit_persistence(&report, Path::new(dir))?;
    }
    Ok(report)
}

fn noisy_dataset(cfg: &ExperimentConfig, base: &Dataset, rep: usize) -> Result<Dataset> {
    let seed = derive_seed(cfg.master_seed, &[&base.id, "noise", &rep.to_string()]);
    base.clone().with_noise(cfg.sigma, seed)
}

/// Gibbs and HMC start from one one-mode sample at the dataset's default mode.
fn pinned_init(cfg: &ExperimentConfig, d: &Dataset, rep: usize) -> Result<Factorization> {
    let seed = derive_seed(cfg.master_seed, &[&d.id, "init", &rep.to_string()]);
    let chain = one_mode_baseline_with(d, d.structure.default_mode(), cfg.sigma, 1, seed, &cfg.optimizer)?;
    Ok(chain.samples.into_iter().next().expect("one sample requested"))
}

fn run_repetition(cfg: &ExperimentConfig, base: &Dataset, rep: usize) -> RepOutput {
    let name = base.id.as_str();
    let seed_of = |m: Method| cell_seed(cfg.master_seed, name, m.name(), rep);
    let mut out = RepOutput {
        cells: Vec::new(),
        bases: BTreeMap::new(),
    };
    let setup = noisy_dataset(cfg, base, rep).and_then(|d| {
        let params = ModelParams::new(cfg.sigma * cfg.sigma, cfg.lambda_a, cfg.lambda_w)?;
        Ok((d, params))
    });
    let (d, params) = match setup {
        Ok(v) => v,
        Err(e) => {
            for &m in &cfg.methods {
                let mut cell = CellResult::new(name, m, rep, seed_of(m));
                cell.errors.push(format!("setup: {e}"));
                out.cells.push(cell);
            }
            return out;
        }
    };
    let x = d.observed();
    let wants = |m: Method| cfg.methods.contains(&m);
    let n = cfg.n_samples;

    let init = if wants(Method::Gibbs) || wants(Method::Hmc) || wants(Method::FilteredRestarts) {
        Some(pinned_init(cfg, &d, rep))
    } else {
        None
    };
    let with_init = |f: &dyn Fn(&Factorization) -> Result<SampleChain>| match init.as_ref() {
        Some(Ok(i)) => f(i),
        Some(Err(e)) => Err(Error::NumericalBreakdown(format!("initialization failed: {e}"))),
        None => unreachable!("init computed for chains that need it"),
    };

    let gibbs = (wants(Method::Gibbs) || wants(Method::FilteredRestarts))
        .then(|| with_init(&|i| gibbs_chain(x, &params, i, n, seed_of(Method::Gibbs))));
    let restarts = (wants(Method::RandomRestarts) || wants(Method::FilteredRestarts))
        .then(|| random_restarts(x, d.rank, cfg.restarts(), seed_of(Method::RandomRestarts), &cfg.optimizer));

    for &method in &cfg.methods {
        let seed = seed_of(method);
        let chain = match method {
            Method::OneMode => {
                one_mode_baseline_with(&d, d.structure.default_mode(), cfg.sigma, n, seed, &cfg.optimizer)
            }
            Method::AllModes => all_modes_baseline_with(&d, cfg.sigma, n, seed, &cfg.optimizer),
            Method::Gibbs => gibbs.clone().expect("gibbs requested"),
            Method::Hmc => with_init(&|i| hmc_chain(x, &params, i, n, &cfg.hmc, seed)),
            Method::RandomRestarts => restarts.clone().expect("restarts requested"),
            Method::FilteredRestarts => match (restarts.as_ref(), gibbs.as_ref()) {
                (Some(Ok(rr)), Some(Ok(g))) => filter_restarts(rr, g, x),
                (Some(Err(e)), _) | (_, Some(Err(e))) => Err(Error::NumericalBreakdown(format!(
                    "dependency failed: {e}"
                ))),
                _ => unreachable!("dependencies computed"),
            },
        };
        let mut cell = CellResult::new(name, method, rep, seed);
        if let Some(chain) = cell.record("sampling", chain) {
            let chain = chain.with_dataset(name);
            if let Some(b) = chain_metrics(cfg, &chain, x, &params, &mut cell) {
                out.bases.insert(method, b);
            }
        }
        out.cells.push(cell);
    }
    out
}

/// Per-chain scalar metrics. Returns the prepared bases when coverage
/// metrics are enabled.
fn chain_metrics(
    cfg: &ExperimentConfig,
    chain: &SampleChain,
    x: &crate::matrix::Matrix,
    params: &ModelParams,
    cell: &mut CellResult,
) -> Option<Vec<PreparedBasis>> {
    cell.n_samples = chain.len();
    cell.extra = chain.meta.extra.clone();
    let m = &cfg.metrics;
    if m.likelihood || m.iat {
        if let Some(trace) = cell.record("log-likelihood", likelihood_trace(chain, x, params.sigma2)) {
            if m.likelihood {
                cell.metrics.insert(METRIC_LOG_LIKELIHOOD.into(), trace.mean());
            }
            if m.iat {
                if let Some(v) = cell.record(METRIC_IAT_LOGLIK, iat_values(&trace.values)) {
                    cell.metrics.insert(METRIC_IAT_LOGLIK.into(), v);
                }
            }
        }
    }
    if m.posterior {
        if let Some(trace) = cell.record("log-posterior", posterior_trace(chain, x, params)) {
            cell.metrics.insert(METRIC_LOG_POSTERIOR.into(), trace.mean());
        }
    }
    if m.iat {
        if let Some(v) = cell.record(METRIC_IAT, chain_iat(chain, x, params.sigma2, m.iat_trace)) {
            cell.metrics.insert(METRIC_IAT.into(), v);
        }
    }
    if m.distances || m.persistence {
        let bases = chain
            .samples
            .iter()
            .take(cfg.coverage_limit)
            .map(|f| PreparedBasis::new(&f.a))
            .collect::<Result<Vec<_>>>();
        return cell.record("bases", bases);
    }
    None
}

/// Distance matrices per method × measure × repetition. MaxDist and
/// MeanDist go to the cells; curves share one ε grid spanning the largest
/// diameter over repetitions so they can be averaged pointwise.
fn coverage_phase(cfg: &ExperimentConfig, name: &str, reps: &mut [RepOutput], report: &mut Report) {
    for &method in &cfg.methods {
        for measure in Measure::ALL {
            let mut matrices: Vec<DistanceMatrix> = Vec::new();
            for rep in reps.iter_mut() {
                let Some(bases) = rep.bases.get(&method) else { continue };
                let cell = rep
                    .cells
                    .iter_mut()
                    .find(|c| c.method == method)
                    .expect("cell exists for every method");
                let Some(dm) = cell.record("distances", pairwise_prepared(bases, measure)) else { continue };
                if cfg.metrics.distances {
                    cell.metrics.insert(max_dist_metric(measure), max_dist(&dm));
                    cell.metrics.insert(mean_dist_metric(measure), mean_dist(&dm));
                }
                if cfg.metrics.persistence {
                    matrices.push(dm);
                }
            }
            if matrices.is_empty() {
                continue;
            }
            let top = matrices.iter().map(max_dist).fold(0.0, f64::max);
            let grid = epsilon_grid(top, cfg.n_eps);
            let curves: Vec<_> = matrices.iter().map(|d| persistence_curve_on_grid(d, &grid)).collect();
            match summarize_curves(&curves) {
                Ok(summary) => report.persistence.push(PersistenceEntry {
                    dataset: name.to_string(),
                    method,
                    measure,
                    summary,
                }),
                Err(e) => report.errors.push(format!("{name}/{method}/{}: {e}", measure.name())),
            }
        }
    }
}
