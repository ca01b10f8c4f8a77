use crate::datasets::{add_noise_with, Dataset, Mode};
use crate::error::{Error, Result};
use crate::factorization::Factorization;
use crate::optimizers::{lee_seung, OptimizerConfig};
use crate::rng::{rng_from_seed, ChainRng};

use super::chain::{Method, SampleChain};

/// Fresh noise `E ~ N(0, σ²)` on the observed data, then Lee–Seung from `start`.
fn perturb_and_factor(
    d: &Dataset,
    start: &Factorization,
    sigma: f64,
    cfg: &OptimizerConfig,
    rng: &mut ChainRng,
) -> Result<Factorization> {
    let y = add_noise_with(d.observed(), sigma, rng);
    lee_seung(&y, start, cfg)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::DomainError {
            value: sigma,
            domain: "sigma >= 0",
        })
    }
}

/// Samples concentrated at one known solution.
pub fn one_mode_baseline(d: &Dataset, mode: Mode, sigma: f64, n: usize, seed: u64) -> Result<SampleChain> {
    one_mode_baseline_with(d, mode, sigma, n, seed, &OptimizerConfig::default())
}

pub fn one_mode_baseline_with(
    d: &Dataset,
    mode: Mode,
    sigma: f64,
    n: usize,
    seed: u64,
    cfg: &OptimizerConfig,
) -> Result<SampleChain> {
    check_sigma(sigma)?;
    let start = d.solution(mode)?;
    let mut rng = rng_from_seed(seed);
    let mut chain = SampleChain::new(Method::OneMode, seed, sigma, start.dims()).with_dataset(&d.id);
    for _ in 0..n {
        chain.samples.push(perturb_and_factor(d, &start, sigma, cfg, &mut rng)?);
    }
    Ok(chain)
}

/// Samples spread over every known solution: each iteration starts from a
/// uniformly drawn mode (a coin for two modes, `δ ~ U[0, 1]` for a family).
pub fn all_modes_baseline(d: &Dataset, sigma: f64, n: usize, seed: u64) -> Result<SampleChain> {
    all_modes_baseline_with(d, sigma, n, seed, &OptimizerConfig::default())
}

pub fn all_modes_baseline_with(
    d: &Dataset,
    sigma: f64,
    n: usize,
    seed: u64,
    cfg: &OptimizerConfig,
) -> Result<SampleChain> {
    check_sigma(sigma)?;
    let mut rng = rng_from_seed(seed);
    let dims = d.solution(d.structure.default_mode())?.dims();
    let mut chain = SampleChain::new(Method::AllModes, seed, sigma, dims).with_dataset(&d.id);
    for _ in 0..n {
        let start = d.solution(d.structure.random_mode(&mut rng))?;
        chain.samples.push(perturb_and_factor(d, &start, sigma, cfg, &mut rng)?);
    }
    Ok(chain)
}
