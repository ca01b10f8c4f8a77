use crate::error::{Error, Result};
use crate::factorization::{check_conforms, Factorization};
use crate::matrix::Matrix;
use crate::model::{ModelParams, RectifiedNormal};
use crate::rng::{rng_from_seed, ChainRng};

use super::chain::{Method, SampleChain};

/// Conditional-variance denominators below this mean a component has died.
const DEAD_COMPONENT: f64 = 1e-300;

/// Systematic-scan Gibbs sampler state. The residual `X − AW` is kept up to
/// date across single-site moves and rebuilt at the start of every sweep.
#[derive(Debug, Clone)]
pub struct GibbsSampler<'a> {
    x: &'a Matrix,
    params: ModelParams,
    a: Matrix,
    w: Matrix,
    residual: Matrix,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(x: &'a Matrix, params: ModelParams, init: &Factorization) -> Result<Self> {
        check_conforms(x, init)?;
        if let Some(i) = init.to_flat().iter().position(|&v| v < 0.0) {
            return Err(Error::NegativeEntry(i));
        }
        let residual = x.sub(&init.product())?;
        Ok(Self {
            x,
            params,
            a: init.a.clone(),
            w: init.w.clone(),
            residual,
        })
    }

    pub fn state(&self) -> Factorization {
        Factorization {
            a: self.a.clone(),
            w: self.w.clone(),
        }
    }

    /// Resamples every entry of `A` (row-major), then every entry of `W`.
    pub fn sweep(&mut self, rng: &mut ChainRng) -> Result<()> {
        self.residual = self.x.sub(&self.a.matmul(&self.w)?)?;
        let (d, r) = self.a.shape();
        let n = self.w.cols();
        let sigma2 = self.params.sigma2;

        let mut w_sq = vec![0.0; r];
        for (k, s) in w_sq.iter_mut().enumerate() {
            *s = self.w.row(k).iter().map(|v| v * v).sum();
        }
        for i in 0..d {
            for k in 0..r {
                if w_sq[k] < DEAD_COMPONENT {
                    return Err(Error::NumericalBreakdown(format!(
                        "row {k} of W vanished (sum of squares {:e})",
                        w_sq[k]
                    )));
                }
                let old = self.a[(i, k)];
                let wk = self.w.row(k);
                let e = &self.residual.as_slice()[i * n..(i + 1) * n];
                // Σₙ W_kn·(E_in + A_ik·W_kn) = Σₙ W_kn·E_in + A_ik·ΣW²
                let num: f64 = wk.iter().zip(e).map(|(wv, ev)| wv * ev).sum::<f64>() + old * w_sq[k];
                let cond = RectifiedNormal::new(num / w_sq[k], sigma2 / w_sq[k], self.params.lambda_a);
                let new = cond.sample(rng);
                let delta = new - old;
                if delta != 0.0 {
                    let e = &mut self.residual.as_mut_slice()[i * n..(i + 1) * n];
                    for (ev, wv) in e.iter_mut().zip(wk) {
                        *ev -= delta * wv;
                    }
                }
                self.a.as_mut_slice()[i * r + k] = new;
            }
        }

        let mut a_sq = vec![0.0; r];
        for (k, s) in a_sq.iter_mut().enumerate() {
            *s = (0..d).map(|i| self.a[(i, k)] * self.a[(i, k)]).sum();
        }
        for k in 0..r {
            if a_sq[k] < DEAD_COMPONENT {
                return Err(Error::NumericalBreakdown(format!(
                    "column {k} of A vanished (sum of squares {:e})",
                    a_sq[k]
                )));
            }
            for j in 0..n {
                let old = self.w[(k, j)];
                let mut num = old * a_sq[k];
                for i in 0..d {
                    num += self.a[(i, k)] * self.residual[(i, j)];
                }
                let cond = RectifiedNormal::new(num / a_sq[k], sigma2 / a_sq[k], self.params.lambda_w);
                let new = cond.sample(rng);
                let delta = new - old;
                if delta != 0.0 {
                    let res = self.residual.as_mut_slice();
                    for i in 0..d {
                        res[i * n + j] -= delta * self.a.as_slice()[i * r + k];
                    }
                }
                self.w.as_mut_slice()[k * n + j] = new;
            }
        }
        Ok(())
    }
}

/// `n` samples, one per full sweep, starting from `init` (not recorded).
pub fn gibbs_chain(
    x: &Matrix,
    params: &ModelParams,
    init: &Factorization,
    n: usize,
    seed: u64,
) -> Result<SampleChain> {
    let mut sampler = GibbsSampler::new(x, *params, init)?;
    let mut rng = rng_from_seed(seed);
    let mut chain = SampleChain::new(Method::Gibbs, seed, params.sigma2.sqrt(), init.dims());
    chain.samples.reserve(n);
    for _ in 0..n {
        sampler.sweep(&mut rng)?;
        chain.samples.push(sampler.state());
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{laurberg, DEFAULT_SIGMA};
    use crate::stats::ks_statistic;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn single_site_conditional_matches_analytic() {
        // D = R = N = 1 with W clamped at w: A | rest is N(x/w, σ²/w²)·Exp(λ)
        // on A ≥ 0, a truncated normal at x/w − λσ²/w².
        let (xv, wv, sigma2, lambda) = (0.3, 2.0, 0.5, 1.5);
        let x = Matrix::from_rows(&[[xv]]);
        let params = ModelParams::new(sigma2, lambda, 1.0).unwrap();
        let init = Factorization::new(Matrix::from_rows(&[[1.0]]), Matrix::from_rows(&[[wv]])).unwrap();
        let mut s = GibbsSampler::new(&x, params, &init).unwrap();
        let mut rng = rng_from_seed(21);
        let mut draws = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            s.sweep(&mut rng).unwrap();
            draws.push(s.a[(0, 0)]);
            s.w = Matrix::from_rows(&[[wv]]);
        }
        let m = xv / wv - lambda * sigma2 / (wv * wv);
        let sd = (sigma2 / (wv * wv)).sqrt();
        let std = Normal::new(0.0, 1.0).unwrap();
        let tail = std.sf(-m / sd);
        let cdf = |a: f64| if a <= 0.0 { 0.0 } else { 1.0 - std.sf((a - m) / sd) / tail };
        let ks = ks_statistic(&draws, cdf);
        assert!(ks < 0.01, "KS {ks}");
    }

    #[test]
    fn deterministic_and_nonnegative() {
        let d = laurberg(0.3).unwrap().with_noise(DEFAULT_SIGMA, 1).unwrap();
        let params = ModelParams::with_sigma(DEFAULT_SIGMA).unwrap();
        let init = d.solution(d.structure.default_mode()).unwrap();
        let c1 = gibbs_chain(d.observed(), &params, &init, 50, 5).unwrap();
        let c2 = gibbs_chain(d.observed(), &params, &init, 50, 5).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(c1.len(), 50);
        assert!(c1.samples.iter().all(|f| f.is_nonnegative()));
        assert_ne!(c1, gibbs_chain(d.observed(), &params, &init, 50, 6).unwrap());
    }

    #[test]
    fn stays_near_exact_solution_at_small_noise() {
        let sigma = 1e-3;
        let d = laurberg(0.3).unwrap();
        let params = ModelParams::with_sigma(sigma).unwrap();
        let init = d.solution(d.structure.default_mode()).unwrap();
        let chain = gibbs_chain(&d.x, &params, &init, 500, 3).unwrap();
        let mean_err = chain
            .samples
            .iter()
            .map(|f| crate::factorization::reconstruction_error(&d.x, f).unwrap())
            .sum::<f64>()
            / chain.len() as f64;
        let bound = 5.0 * sigma * ((d.x.rows() * d.x.cols()) as f64).sqrt();
        assert!(mean_err < bound, "mean error {mean_err} vs {bound}");
    }

    #[test]
    fn residual_tracking_matches_recomputation() {
        let d = laurberg(0.5).unwrap().with_noise(0.05, 2).unwrap();
        let params = ModelParams::with_sigma(0.05).unwrap();
        let init = d.solution(d.structure.default_mode()).unwrap();
        let mut s = GibbsSampler::new(d.observed(), params, &init).unwrap();
        let mut rng = rng_from_seed(4);
        for _ in 0..20 {
            s.sweep(&mut rng).unwrap();
        }
        let fresh = d.observed().sub(&s.a.matmul(&s.w).unwrap()).unwrap();
        assert!(fresh.max_abs_diff(&s.residual) < 1e-12);
    }

    #[test]
    fn dead_component_is_reported() {
        let x = Matrix::filled(2, 2, 1.0);
        let params = ModelParams::with_sigma(0.1).unwrap();
        let init = Factorization::new(Matrix::filled(2, 1, 1.0), Matrix::zeros(1, 2)).unwrap();
        let mut s = GibbsSampler::new(&x, params, &init).unwrap();
        assert!(matches!(s.sweep(&mut rng_from_seed(1)), Err(Error::NumericalBreakdown(_))));
    }
}
