use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factorization::{reconstruction_error, Factorization};
use crate::matrix::Matrix;
use crate::optimizers::{projected_gradient, OptimizerConfig};
use crate::rng::{derive_seed, rng_from_seed};

use super::chain::{Method, SampleChain};

/// Filtered restarts keep errors up to this multiple of the worst Gibbs error.
pub const FILTER_FACTOR: f64 = 10.0;

/// Independent projected-gradient solves from uniform `(0, 1]` starts. Each
/// restart has its own stream, so the result does not depend on scheduling.
pub fn random_restarts(
    x: &Matrix,
    rank: usize,
    n: usize,
    seed: u64,
    cfg: &OptimizerConfig,
) -> Result<SampleChain> {
    if rank == 0 {
        return Err(Error::DimensionMismatch("rank must be at least 1".into()));
    }
    let (d, nc) = x.shape();
    let samples = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, &["restart", &i.to_string()]));
            let mut uniform = |_, _| 1.0 - rng.random::<f64>();
            let a = Matrix::from_fn(d, rank, &mut uniform);
            let w = Matrix::from_fn(rank, nc, &mut uniform);
            projected_gradient(x, &Factorization::new(a, w)?, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut chain = SampleChain::new(Method::RandomRestarts, seed, 0.0, (d, rank, nc));
    chain.samples = samples;
    Ok(chain)
}

/// Keeps restarts whose reconstruction error is at most `threshold`.
pub fn filter_by_threshold(restarts: &SampleChain, x: &Matrix, threshold: f64) -> Result<SampleChain> {
    let mut out = restarts.clone();
    out.meta.method = Method::FilteredRestarts;
    out.samples.clear();
    for f in &restarts.samples {
        if reconstruction_error(x, f)? <= threshold {
            out.samples.push(f.clone());
        }
    }
    out.set_extra("filter_threshold", threshold);
    out.set_extra("kept", out.samples.len() as f64);
    out.set_extra("total", restarts.samples.len() as f64);
    if out.samples.is_empty() {
        return Err(Error::EmptyFilter { threshold });
    }
    Ok(out)
}

/// Restarts within [`FILTER_FACTOR`] times the largest reconstruction error
/// seen in the Gibbs chain.
pub fn filter_restarts(restarts: &SampleChain, gibbs: &SampleChain, x: &Matrix) -> Result<SampleChain> {
    let mut worst = 0.0f64;
    for f in &gibbs.samples {
        worst = worst.max(reconstruction_error(x, f)?);
    }
    let mut out = filter_by_threshold(restarts, x, FILTER_FACTOR * worst)?;
    out.meta.sigma = gibbs.meta.sigma;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{laurberg, DEFAULT_SIGMA};
    use crate::model::ModelParams;
    use crate::samplers::gibbs_chain;

    #[test]
    fn deterministic_and_nonnegative() {
        let d = laurberg(0.3).unwrap().with_noise(DEFAULT_SIGMA, 1).unwrap();
        let cfg = OptimizerConfig::default();
        let c = random_restarts(d.observed(), 3, 16, 9, &cfg).unwrap();
        assert_eq!(c.len(), 16);
        assert!(c.samples.iter().all(|f| f.is_nonnegative()));
        assert_eq!(c, random_restarts(d.observed(), 3, 16, 9, &cfg).unwrap());
    }

    #[test]
    fn gibbs_chain_passes_its_own_filter() {
        let d = laurberg(0.3).unwrap().with_noise(DEFAULT_SIGMA, 1).unwrap();
        let params = ModelParams::with_sigma(DEFAULT_SIGMA).unwrap();
        let init = d.solution(d.structure.default_mode()).unwrap();
        let g = gibbs_chain(d.observed(), &params, &init, 40, 2).unwrap();
        let kept = filter_restarts(&g, &g, d.observed()).unwrap();
        assert_eq!(kept.samples, g.samples);
        assert_eq!(kept.meta.method, Method::FilteredRestarts);
    }

    #[test]
    fn threshold_splits_constructed_chain() {
        let d = laurberg(0.3).unwrap();
        let good = d.solution(d.structure.default_mode()).unwrap();
        let mut bad = good.clone();
        for v in bad.a.as_mut_slice() {
            *v += 1.0;
        }
        let good_err = 1e-3;
        let mut slightly_off = good.clone();
        slightly_off.a.as_mut_slice()[0] += good_err;
        let bad_err = reconstruction_error(&d.x, &bad).unwrap();
        let near_err = reconstruction_error(&d.x, &slightly_off).unwrap();
        assert!(bad_err > 100.0 * near_err);

        let mut chain = SampleChain::new(Method::RandomRestarts, 0, 0.0, good.dims());
        for i in 0..10 {
            chain.samples.push(if i % 2 == 0 { slightly_off.clone() } else { bad.clone() });
        }
        let kept = filter_by_threshold(&chain, &d.x, FILTER_FACTOR * near_err).unwrap();
        assert_eq!(kept.len(), 5);
        assert_eq!(kept.extra("kept"), Some(5.0));

        let all = filter_by_threshold(&chain, &d.x, f64::INFINITY).unwrap();
        assert_eq!(all.samples, chain.samples);

        assert_eq!(
            filter_by_threshold(&chain, &d.x, -1.0),
            Err(Error::EmptyFilter { threshold: -1.0 })
        );
    }
}
