use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{check_conforms, Factorization};
use crate::matrix::Matrix;
use crate::model::{LogSpaceTarget, ModelParams};
use crate::rng::{rng_from_seed, ChainRng};

use super::chain::{Method, SampleChain};

/// Energy errors beyond this count as divergent and are rejected.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;
/// Replacement for zero entries before the log transform.
pub const ZERO_OFFSET: f64 = 1e-6;
/// Gain of the burn-in step-size controller.
const ADAPT_RATE: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmcConfig {
    pub leap_count: usize,
    pub burn_in: usize,
    pub initial_step: f64,
    pub target_accept: f64,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            leap_count: 100,
            burn_in: 200,
            initial_step: 1e-3,
            target_accept: 0.65,
        }
    }
}

impl HmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.leap_count == 0 {
            return Err(Error::Config("leap_count must be at least 1".into()));
        }
        if !(self.initial_step > 0.0) || !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(
                "initial_step must be positive and target_accept in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// A differentiable log density over `R^dim`.
pub trait Target {
    fn dim(&self) -> usize;
    fn log_density_and_grad(&mut self, q: &[f64], grad: &mut [f64]) -> Result<f64>;
}

impl Target for LogSpaceTarget<'_> {
    fn dim(&self) -> usize {
        LogSpaceTarget::dim(self)
    }

    fn log_density_and_grad(&mut self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        LogSpaceTarget::log_density_and_grad(self, q, grad)
    }
}

/// Leapfrog integration of `H(q, p) = −log π(q) + ½pᵀp` for `steps` steps.
/// Returns the end point and `log π` there.
pub fn leapfrog<T: Target>(
    target: &mut T,
    q: &mut [f64],
    p: &mut [f64],
    step: f64,
    steps: usize,
) -> Result<f64> {
    let mut grad = vec![0.0; q.len()];
    target.log_density_and_grad(q, &mut grad)?;
    for (pi, g) in p.iter_mut().zip(&grad) {
        *pi += 0.5 * step * g;
    }
    let mut logp = 0.0;
    for s in 0..steps {
        for (qi, pi) in q.iter_mut().zip(p.iter()) {
            *qi += step * pi;
        }
        logp = target.log_density_and_grad(q, &mut grad)?;
        let scale = if s + 1 == steps { 0.5 } else { 1.0 };
        for (pi, g) in p.iter_mut().zip(&grad) {
            *pi += scale * step * g;
        }
    }
    Ok(logp)
}

fn kinetic(p: &[f64]) -> f64 {
    0.5 * p.iter().map(|v| v * v).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmcRun {
    pub draws: Vec<Vec<f64>>,
    /// Over post-burn-in iterations.
    pub acceptance_rate: f64,
    pub step_size: f64,
    pub divergences: usize,
}

/// Runs `cfg.burn_in` adaptive iterations (discarded), then `n` iterations
/// at the frozen step size.
pub fn hmc_sample<T: Target>(
    target: &mut T,
    q0: &[f64],
    n: usize,
    cfg: &HmcConfig,
    rng: &mut ChainRng,
) -> Result<HmcRun> {
    cfg.validate()?;
    if q0.len() != target.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, target needs {}",
            q0.len(),
            target.dim()
        )));
    }
    let mut q = q0.to_vec();
    let mut grad = vec![0.0; q.len()];
    let mut logp = target.log_density_and_grad(&q, &mut grad)?;
    let mut step = cfg.initial_step;
    let mut accepted = 0usize;
    let mut divergences = 0usize;
    let mut draws = Vec::with_capacity(n);
    let mut p = vec![0.0; q.len()];
    let mut q_new = vec![0.0; q.len()];

    for it in 0..cfg.burn_in + n {
        for pi in p.iter_mut() {
            *pi = rng.sample(StandardNormal);
        }
        let h0 = -logp + kinetic(&p);
        q_new.copy_from_slice(&q);
        let accept = match leapfrog(target, &mut q_new, &mut p, step, cfg.leap_count) {
            Ok(lp) => {
                let dh = -lp + kinetic(&p) - h0;
                if !dh.is_finite() || dh.abs() > DIVERGENCE_THRESHOLD {
                    divergences += 1;
                    false
                } else if dh <= 0.0 || rng.random::<f64>() < (-dh).exp() {
                    logp = lp;
                    q.copy_from_slice(&q_new);
                    true
                } else {
                    false
                }
            }
            Err(Error::NonFinite) => {
                divergences += 1;
                false
            }
            Err(e) => return Err(e),
        };
        if it < cfg.burn_in {
            // Log-step drift is zero exactly when the acceptance rate equals the target.
            let gain = if accept {
                ADAPT_RATE * (1.0 - cfg.target_accept)
            } else {
                -ADAPT_RATE * cfg.target_accept
            };
            step *= gain.exp();
        } else {
            if accept {
                accepted += 1;
            }
            draws.push(q.clone());
        }
    }
    Ok(HmcRun {
        draws,
        acceptance_rate: if n == 0 { 0.0 } else { accepted as f64 / n as f64 },
        step_size: step,
        divergences,
    })
}

/// HMC on the entrywise log of `(A, W)`; zeros in `init` are replaced by
/// [`ZERO_OFFSET`] first. All samples are strictly positive.
pub fn hmc_chain(
    x: &Matrix,
    params: &ModelParams,
    init: &Factorization,
    n: usize,
    cfg: &HmcConfig,
    seed: u64,
) -> Result<SampleChain> {
    check_conforms(x, init)?;
    if let Some(i) = init.to_flat().iter().position(|&v| v < 0.0) {
        return Err(Error::NegativeEntry(i));
    }
    let (d, r, nc) = init.dims();
    let q0: Vec<f64> = init
        .to_flat()
        .iter()
        .map(|&v| if v > 0.0 { v.ln() } else { ZERO_OFFSET.ln() })
        .collect();
    let mut target = LogSpaceTarget::new(x, r, *params);
    let mut rng = rng_from_seed(seed);
    let run = hmc_sample(&mut target, &q0, n, cfg, &mut rng)?;

    let mut chain = SampleChain::new(Method::Hmc, seed, params.sigma2.sqrt(), (d, r, nc));
    chain.set_extra("acceptance_rate", run.acceptance_rate);
    chain.set_extra("step_size", run.step_size);
    chain.set_extra("divergences", run.divergences as f64);
    chain.samples = run
        .draws
        .iter()
        .map(|q| {
            let flat: Vec<f64> = q.iter().map(|v| v.exp()).collect();
            Factorization::from_flat(d, r, nc, &flat)
        })
        .collect::<Result<_>>()?;
    Ok(chain)
}
