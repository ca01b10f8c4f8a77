use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::Factorization;
use crate::matrix::Matrix;
use crate::model::log_likelihood;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    OneMode,
    AllModes,
    Gibbs,
    Hmc,
    RandomRestarts,
    FilteredRestarts,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::OneMode,
        Method::AllModes,
        Method::Gibbs,
        Method::Hmc,
        Method::RandomRestarts,
        Method::FilteredRestarts,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::OneMode => "one_mode",
            Method::AllModes => "all_modes",
            Method::Gibbs => "gibbs",
            Method::Hmc => "hmc",
            Method::RandomRestarts => "random_restarts",
            Method::FilteredRestarts => "filtered_restarts",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown method '{s}'")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything about a chain except its samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub method: Method,
    pub seed: u64,
    pub sigma: f64,
    pub dataset_id: String,
    /// `(D, R, N)`.
    pub dims: (usize, usize, usize),
    /// Method-specific numbers: acceptance rate, step size, filter threshold…
    pub extra: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleChain {
    pub meta: ChainMeta,
    pub samples: Vec<Factorization>,
}

#[derive(Serialize, Deserialize)]
struct SampleLine {
    a: Vec<f64>,
    w: Vec<f64>,
    log_likelihood: f64,
}

impl SampleChain {
    pub fn new(method: Method, seed: u64, sigma: f64, dims: (usize, usize, usize)) -> Self {
        Self {
            meta: ChainMeta {
                method,
                seed,
                sigma,
                dataset_id: String::new(),
                dims,
                extra: BTreeMap::new(),
            },
            samples: Vec::new(),
        }
    }

    pub fn with_dataset(mut self, id: &str) -> Self {
        self.meta.dataset_id = id.to_string();
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.meta.extra.get(key).copied()
    }

    pub fn set_extra(&mut self, key: &str, value: f64) {
        self.meta.extra.insert(key.to_string(), value);
    }

    /// JSON lines: the metadata header, then one line per sample holding the
    /// flattened `A` and `W` (row-major) and its log-likelihood under `x`.
    pub fn write_jsonl<W: Write>(&self, out: &mut W, x: &Matrix) -> Result<()> {
        serde_json::to_writer(&mut *out, &self.meta)?;
        out.write_all(b"\n")?;
        let sigma2 = self.meta.sigma * self.meta.sigma;
        for f in &self.samples {
            let line = SampleLine {
                a: f.a.as_slice().to_vec(),
                w: f.w.as_slice().to_vec(),
                log_likelihood: log_likelihood(x, f, sigma2)?,
            };
            serde_json::to_writer(&mut *out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<SampleChain> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty chain file".into()))??;
        let meta: ChainMeta = serde_json::from_str(&header)?;
        let (d, r, n) = meta.dims;
        let mut samples = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let s: SampleLine = serde_json::from_str(&line)?;
            samples.push(Factorization::new(
                Matrix::from_row_major(d, r, s.a)?,
                Matrix::from_row_major(r, n, s.w)?,
            )?);
        }
        Ok(SampleChain { meta, samples })
    }
}
