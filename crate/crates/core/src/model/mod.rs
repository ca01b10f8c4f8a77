//! Bayesian NMF: Gaussian likelihood `X ~ N(AW, σ²)` with independent
//! exponential priors on the entries of `A` (rate `λ_A`) and `W` (rate `λ_W`).

mod rectified;

pub use rectified::{standard_normal_above, RectifiedNormal};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{check_conforms, Factorization};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sigma2: f64,
    pub lambda_a: f64,
    pub lambda_w: f64,
}

impl ModelParams {
    pub fn new(sigma2: f64, lambda_a: f64, lambda_w: f64) -> Result<Self> {
        for (v, name) in [(sigma2, "sigma2 > 0"), (lambda_a, "lambda_a > 0"), (lambda_w, "lambda_w > 0")] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::DomainError { value: v, domain: name });
            }
        }
        Ok(Self {
            sigma2,
            lambda_a,
            lambda_w,
        })
    }

    /// Unit-rate priors and the given noise standard deviation.
    pub fn with_sigma(sigma: f64) -> Result<Self> {
        Self::new(sigma * sigma, 1.0, 1.0)
    }
}

fn squared_residual(x: &Matrix, f: &Factorization) -> Result<f64> {
    check_conforms(x, f)?;
    let prod = f.product();
    Ok(x.as_slice()
        .iter()
        .zip(prod.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// `−(DN/2)·ln(2πσ²) − ‖X − AW‖²_F / (2σ²)`
pub fn log_likelihood(x: &Matrix, f: &Factorization, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::DomainError {
            value: sigma2,
            domain: "sigma2 > 0",
        });
    }
    let rss = squared_residual(x, f)?;
    let cells = (x.rows() * x.cols()) as f64;
    Ok(-0.5 * cells * (2.0 * std::f64::consts::PI * sigma2).ln() - rss / (2.0 * sigma2))
}

/// Sum of exponential log-densities `ln λ − λ·x` over the entries.
pub fn log_prior(f: &Factorization, params: &ModelParams) -> Result<f64> {
    if let Some(i) = f.to_flat().iter().position(|&v| v < 0.0) {
        return Err(Error::NegativeEntry(i));
    }
    let part = |m: &Matrix, lambda: f64| -> f64 {
        m.as_slice().iter().map(|&v| lambda.ln() - lambda * v).sum()
    };
    Ok(part(&f.a, params.lambda_a) + part(&f.w, params.lambda_w))
}

pub fn log_posterior(x: &Matrix, f: &Factorization, params: &ModelParams) -> Result<f64> {
    let prior = log_prior(f, params)?;
    Ok(log_likelihood(x, f, params.sigma2)? + prior)
}

/// The posterior over `q = ln(A, W)` (entrywise), including the log-Jacobian
/// `Σq` of the exponential map. HMC runs on this density.
#[derive(Debug, Clone)]
pub struct LogSpaceTarget<'a> {
    x: &'a Matrix,
    params: ModelParams,
    d: usize,
    r: usize,
    n: usize,
    // scratch
    residual: Vec<f64>,
}

impl<'a> LogSpaceTarget<'a> {
    pub fn new(x: &'a Matrix, rank: usize, params: ModelParams) -> Self {
        let (d, n) = x.shape();
        Self {
            x,
            params,
            d,
            r: rank,
            n,
            residual: vec![0.0; d * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.r * (self.d + self.n)
    }

    fn check_len(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "log-space state has length {}, expected {}",
                q.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Fills `self.residual = X − exp(q_A)·exp(q_W)`; returns its squared norm.
    fn fill_residual(&mut self, a: &[f64], w: &[f64]) -> f64 {
        let (d, r, n) = (self.d, self.r, self.n);
        let x = self.x.as_slice();
        let mut rss = 0.0;
        for i in 0..d {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..r {
                    s += a[i * r + k] * w[k * n + j];
                }
                let e = x[i * n + j] - s;
                self.residual[i * n + j] = e;
                rss += e * e;
            }
        }
        rss
    }

    fn log_density_from(&self, rss: f64, a: &[f64], w: &[f64], q: &[f64]) -> f64 {
        let p = &self.params;
        let cells = (self.d * self.n) as f64;
        let lik = -0.5 * cells * (2.0 * std::f64::consts::PI * p.sigma2).ln() - rss / (2.0 * p.sigma2);
        let prior_a: f64 = a.iter().map(|&v| p.lambda_a.ln() - p.lambda_a * v).sum();
        let prior_w: f64 = w.iter().map(|&v| p.lambda_w.ln() - p.lambda_w * v).sum();
        lik + prior_a + prior_w + q.iter().sum::<f64>()
    }

    fn split_exp(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let na = self.d * self.r;
        (
            q[..na].iter().map(|v| v.exp()).collect(),
            q[na..].iter().map(|v| v.exp()).collect(),
        )
    }

    pub fn log_density(&mut self, q: &[f64]) -> Result<f64> {
        self.check_len(q)?;
        let (a, w) = self.split_exp(q);
        let rss = self.fill_residual(&a, &w);
        let v = self.log_density_from(rss, &a, &w, q);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite)
        }
    }

    /// Log density and its gradient with respect to `q`.
    pub fn log_density_and_grad(&mut self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.check_len(q)?;
        let (d, r, n) = (self.d, self.r, self.n);
        let (a, w) = self.split_exp(q);
        let rss = self.fill_residual(&a, &w);
        let value = self.log_density_from(rss, &a, &w, q);
        let inv_s2 = 1.0 / self.params.sigma2;
        let na = d * r;
        // ∂/∂A = (X − AW)Wᵀ/σ² − λ_A, then chain rule through A = e^q plus Jacobian 1.
        for i in 0..d {
            for k in 0..r {
                let mut s = 0.0;
                for j in 0..n {
                    s += self.residual[i * n + j] * w[k * n + j];
                }
                let g = s * inv_s2 - self.params.lambda_a;
                grad[i * r + k] = a[i * r + k] * g + 1.0;
            }
        }
        for k in 0..r {
            for j in 0..n {
                let mut s = 0.0;
                for i in 0..d {
                    s += a[i * r + k] * self.residual[i * n + j];
                }
                let g = s * inv_s2 - self.params.lambda_w;
                grad[na + k * n + j] = w[k * n + j] * g + 1.0;
            }
        }
        if value.is_finite() && grad.iter().all(|g| g.is_finite()) {
            Ok(value)
        } else {
            Err(Error::NonFinite)
        }
    }
}

/// Gradient of `log_posterior(e^q) + Σq` with respect to `q`, where `q`
/// stacks `ln A` then `ln W`, both row-major.
pub fn grad_log_posterior_logspace(
    x: &Matrix,
    q: &[f64],
    rank: usize,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut target = LogSpaceTarget::new(x, rank, *params);
    let mut grad = vec![0.0; q.len()];
    target.check_len(q)?;
    target.log_density_and_grad(q, &mut grad)?;
    Ok(grad)
}

/// `log_posterior(e^q) + Σq`.
pub fn log_posterior_logspace(x: &Matrix, q: &[f64], rank: usize, params: &ModelParams) -> Result<f64> {
    LogSpaceTarget::new(x, rank, *params).log_density(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_rows(&[[v]])
    }

    #[test]
    fn likelihood_hand_values() {
        let f = Factorization::new(scalar(1.0), scalar(1.0)).unwrap();
        let exact = log_likelihood(&scalar(1.0), &f, 1.0).unwrap();
        assert!((exact + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        let off = log_likelihood(&scalar(2.0), &f, 1.0).unwrap();
        assert!((off - (-0.5 * (2.0 * PI).ln() - 0.5)).abs() < 1e-15);
        // Residual 2 instead of 1 quadruples the quadratic term.
        let off2 = log_likelihood(&scalar(3.0), &f, 1.0).unwrap();
        assert!(((off2 - exact) - 4.0 * (off - exact)).abs() < 1e-14);
    }

    #[test]
    fn posterior_parts() {
        let params = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let x = Matrix::zeros(2, 3);
        let f = Factorization::new(Matrix::zeros(2, 1), Matrix::zeros(1, 3)).unwrap();
        let lp = log_posterior(&x, &f, &params).unwrap();
        assert_eq!(lp, log_likelihood(&x, &f, 1.0).unwrap());

        let params = ModelParams::new(0.5, 2.0, 3.0).unwrap();
        let mut bumped = f.clone();
        bumped.a[(1, 0)] += 0.25;
        let drop = log_prior(&f, &params).unwrap() - log_prior(&bumped, &params).unwrap();
        assert!((drop - 2.0 * 0.25).abs() < 1e-15);

        let mut neg = f.clone();
        neg.w[(0, 2)] = -1.0;
        assert_eq!(log_posterior(&x, &neg, &params), Err(Error::NegativeEntry(4)));
    }

    #[test]
    fn posterior_recomposes_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = ModelParams::new(0.3, 0.7, 1.9).unwrap();
        for _ in 0..20 {
            let a = Matrix::from_fn(4, 2, |_, _| rng.random_range(0.0..2.0));
            let w = Matrix::from_fn(2, 5, |_, _| rng.random_range(0.0..2.0));
            let x = Matrix::from_fn(4, 5, |_, _| rng.random_range(0.0..3.0));
            let f = Factorization::new(a.clone(), w.clone()).unwrap();
            // Independent recomputation, entry by entry.
            let prod = a.matmul(&w).unwrap();
            let mut rss = 0.0;
            for i in 0..4 {
                for j in 0..5 {
                    rss += (x[(i, j)] - prod[(i, j)]).powi(2);
                }
            }
            let lik = -10.0 * (2.0 * PI * 0.3).ln() - rss / 0.6;
            let pa: f64 = a.as_slice().iter().map(|v| 0.7f64.ln() - 0.7 * v).sum();
            let pw: f64 = w.as_slice().iter().map(|v| 1.9f64.ln() - 1.9 * v).sum();
            let lp = log_posterior(&x, &f, &params).unwrap();
            assert!((lp - (lik + pa + pw)).abs() < 1e-9 * lp.abs().max(1.0));
        }
    }

    fn random_instance(rng: &mut ChaCha8Rng, d: usize, r: usize, n: usize) -> (Matrix, Vec<f64>) {
        let x = Matrix::from_fn(d, n, |_, _| rng.random_range(0.0..3.0));
        let q = (0..r * (d + n)).map(|_| rng.random_range(-1.0..1.0)).collect();
        (x, q)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = ModelParams::new(0.5, 1.0, 1.5).unwrap();
        let h = 1e-5;
        for _ in 0..20 {
            let (x, q) = random_instance(&mut rng, 6, 3, 6);
            let g = grad_log_posterior_logspace(&x, &q, 3, &params).unwrap();
            let mut diff2 = 0.0;
            let mut norm2 = 0.0;
            for k in 0..q.len() {
                let mut up = q.clone();
                let mut down = q.clone();
                up[k] += h;
                down[k] -= h;
                let fd = (log_posterior_logspace(&x, &up, 3, &params).unwrap()
                    - log_posterior_logspace(&x, &down, 3, &params).unwrap())
                    / (2.0 * h);
                diff2 += (fd - g[k]).powi(2);
                norm2 += g[k].powi(2);
            }
            let rel = (diff2 / norm2).sqrt();
            assert!(rel < 1e-5, "relative error {rel}");
        }
    }

    #[test]
    fn logspace_density_matches_posterior_plus_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let params = ModelParams::new(0.5, 1.0, 1.5).unwrap();
        let (x, q) = random_instance(&mut rng, 4, 2, 3);
        let flat: Vec<f64> = q.iter().map(|v| v.exp()).collect();
        let f = Factorization::from_flat(4, 2, 3, &flat).unwrap();
        let direct = log_posterior(&x, &f, &params).unwrap() + q.iter().sum::<f64>();
        let via = log_posterior_logspace(&x, &q, 2, &params).unwrap();
        assert!((direct - via).abs() < 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn gradient_vanishes_at_a_maximum() {
        // Plain gradient ascent with backtracking to a stationary point.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let params = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        let (x, mut q) = random_instance(&mut rng, 3, 1, 3);
        let mut target = LogSpaceTarget::new(&x, 1, params);
        let mut g = vec![0.0; q.len()];
        let mut f = target.log_density_and_grad(&q, &mut g).unwrap();
        let mut step = 1.0;
        for _ in 0..100_000 {
            let gn: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gn < 1e-7 {
                break;
            }
            loop {
                let trial: Vec<f64> = q.iter().zip(&g).map(|(a, b)| a + step * b).collect();
                let ft = target.log_density(&trial).unwrap();
                if ft >= f + 0.5 * step * gn * gn {
                    q = trial;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            f = target.log_density_and_grad(&q, &mut g).unwrap();
        }
        let g = grad_log_posterior_logspace(&x, &q, 1, &params).unwrap();
        let gn: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(gn < 1e-6, "gradient norm {gn}");
    }

    #[test]
    fn prior_and_jacobian_gradient() {
        // With X = 0 and tiny entries the likelihood gradient vanishes to first
        // order, leaving 1 − λ·e^q.
        let x = Matrix::zeros(2, 2);
        let params = ModelParams::new(1.0, 2.0, 3.0).unwrap();
        let q = vec![-30.0; 8];
        let g = grad_log_posterior_logspace(&x, &q, 2, &params).unwrap();
        for (i, gi) in g.iter().enumerate() {
            let lambda = if i < 4 { 2.0 } else { 3.0 };
            assert!((gi - (1.0 - lambda * (-30.0f64).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_rejects_bad_input() {
        let x = Matrix::zeros(2, 2);
        let params = ModelParams::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(
            grad_log_posterior_logspace(&x, &[f64::NAN; 8], 2, &params),
            Err(Error::NonFinite)
        );
        assert!(matches!(
            grad_log_posterior_logspace(&x, &[0.0; 7], 2, &params),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, -1.0, 1.0).is_err());
        assert_eq!(ModelParams::with_sigma(0.1).unwrap().sigma2, 0.1 * 0.1);
    }
}
