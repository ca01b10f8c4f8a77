//! Per-chain scalar summaries: log-likelihood traces and integrated
//! autocorrelation time.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{log_likelihood, log_posterior, ModelParams};
use crate::samplers::SampleChain;
use crate::stats;

pub const IAT_MIN_LEN: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarTrace {
    pub label: String,
    pub values: Vec<f64>,
}

impl ScalarTrace {
    pub fn new(label: &str, values: Vec<f64>) -> Self {
        Self {
            label: label.to_string(),
            values,
        }
    }

    pub fn mean(&self) -> f64 {
        stats::mean(&self.values)
    }

    pub fn quartiles(&self) -> (f64, f64, f64) {
        stats::quartiles(&self.values)
    }
}

/// Per-sample `log p(X | A, W)`, without the prior.
pub fn likelihood_trace(chain: &SampleChain, x: &Matrix, sigma2: f64) -> Result<ScalarTrace> {
    let values = chain
        .samples
        .iter()
        .map(|f| log_likelihood(x, f, sigma2))
        .collect::<Result<_>>()?;
    Ok(ScalarTrace::new("log_likelihood", values))
}

/// Per-sample unnormalized log posterior (likelihood plus prior).
pub fn posterior_trace(chain: &SampleChain, x: &Matrix, params: &ModelParams) -> Result<ScalarTrace> {
    let values = chain
        .samples
        .iter()
        .map(|f| log_posterior(x, f, params))
        .collect::<Result<_>>()?;
    Ok(ScalarTrace::new("log_posterior", values))
}

/// Which scalar summarizes a chain for [`chain_iat`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IatTrace {
    /// Mean over the traces of every entry of `A` and `W`.
    Entries,
    LogLikelihood,
}

pub fn chain_iat(chain: &SampleChain, x: &Matrix, sigma2: f64, kind: IatTrace) -> Result<f64> {
    match kind {
        IatTrace::Entries => per_entry_iat(chain),
        IatTrace::LogLikelihood => iat(&likelihood_trace(chain, x, sigma2)?),
    }
}

pub fn iat(trace: &ScalarTrace) -> Result<f64> {
    iat_values(&trace.values)
}

fn check_trace(values: &[f64]) -> Result<()> {
    if values.len() < IAT_MIN_LEN {
        return Err(Error::TooShort {
            len: values.len(),
            min: IAT_MIN_LEN,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Geyer's initial positive sequence on autocorrelations `rho(k)`, k ≥ 1.
/// Pairs `ρ_{2m} + ρ_{2m+1}` (with ρ₀ = 1) are summed until the first
/// nonpositive pair; lags stop at `n/2`. Since `Σ Γ_m = 1 + Σ_{k≥1} ρ_k`,
/// the IAT is `2 Σ Γ_m − 1`, clamped below at 1.
fn geyer_ips(n: usize, mut rho: impl FnMut(usize) -> f64) -> f64 {
    let max_lag = n / 2;
    let mut total = 0.0;
    let mut k = 0;
    while k < max_lag {
        let even = if k == 0 { 1.0 } else { rho(k) };
        let pair = even + rho(k + 1);
        if pair <= 0.0 {
            break;
        }
        total += pair;
        k += 2;
    }
    (2.0 * total - 1.0).max(1.0)
}

/// `1 + 2Σ_{k≥1} ρ̂_k` with biased sample autocorrelations, truncated by
/// Geyer's initial positive sequence. Lags are summed directly and only as
/// far as the truncation needs. Constant traces give 1.
pub fn iat_values(values: &[f64]) -> Result<f64> {
    check_trace(values)?;
    if values.iter().all(|&v| v == values[0]) {
        return Ok(1.0);
    }
    let n = values.len();
    let m = stats::mean(values);
    let centered: Vec<f64> = values.iter().map(|v| v - m).collect();
    let autocov = |k: usize| -> f64 {
        centered[..n - k]
            .iter()
            .zip(&centered[k..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let c0 = autocov(0);
    if c0 <= 0.0 {
        return Ok(1.0);
    }
    Ok(geyer_ips(n, |k| autocov(k) / c0))
}

/// Same estimate as [`iat_values`], with all autocorrelations from one FFT.
/// Preferable when the correlation time is long.
pub fn iat_values_fft(values: &[f64]) -> Result<f64> {
    check_trace(values)?;
    if values.iter().all(|&v| v == values[0]) {
        return Ok(1.0);
    }
    let n = values.len();
    let m = stats::mean(values);
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = values
        .iter()
        .map(|v| Complex::new(v - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    // Unnormalized inverse: entry k is len·Σ_t x_t x_{t+k}.
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        return Ok(1.0);
    }
    Ok(geyer_ips(n, |k| buf[k].re / c0))
}

/// Mean IAT over the traces of every entry of `A` and `W`. Entries that stay
/// constant contribute 1.
pub fn per_entry_iat(chain: &SampleChain) -> Result<f64> {
    let first = chain.samples.first().ok_or(Error::TooShort {
        len: 0,
        min: IAT_MIN_LEN,
    })?;
    let dim = first.len();
    let flats: Vec<Vec<f64>> = chain.samples.iter().map(|f| f.to_flat()).collect();
    let per_entry = (0..dim)
        .into_par_iter()
        .map(|e| {
            let trace: Vec<f64> = flats.iter().map(|v| v[e]).collect();
            iat_values_fft(&trace)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_entry.iter().sum::<f64>() / dim as f64)
}
