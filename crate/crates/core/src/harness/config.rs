use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coverage::{DEFAULT_LIMIT, DEFAULT_N_EPS};
use crate::datasets::{by_name, DATASET_NAMES, DEFAULT_SIGMA};
use crate::diagnostics::IatTrace;
use crate::error::{Error, Result};
use crate::optimizers::OptimizerConfig;
use crate::samplers::{HmcConfig, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Small datasets, 2000 samples, 3 repetitions.
    Desk,
    /// All datasets, 10 000 samples, 10 repetitions.
    Full,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Profile> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(Error::Config(format!("unknown profile {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricFlags {
    pub likelihood: bool,
    pub iat: bool,
    pub distances: bool,
    pub persistence: bool,
    /// Scalar summarized by the `iat` metric.
    pub iat_trace: IatTrace,
    /// Also report the mean log posterior (likelihood plus prior).
    pub posterior: bool,
}

impl Default for MetricFlags {
    fn default() -> Self {
        Self {
            likelihood: true,
            iat: true,
            distances: true,
            persistence: true,
            iat_trace: IatTrace::Entries,
            posterior: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub datasets: Vec<String>,
    pub methods: Vec<Method>,
    pub n_samples: usize,
    /// Number of random restarts; defaults to `n_samples`.
    pub n_restarts: Option<usize>,
    pub repetitions: usize,
    /// Noise added to the data and assumed by the samplers.
    pub sigma: f64,
    pub lambda_a: f64,
    pub lambda_w: f64,
    pub master_seed: u64,
    pub metrics: MetricFlags,
    /// Distances and curves use the first this-many samples of each chain.
    pub coverage_limit: usize,
    pub n_eps: usize,
    pub hmc: HmcConfig,
    pub optimizer: OptimizerConfig,
    pub output_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::profile(Profile::Desk, 0)
    }
}

impl ExperimentConfig {
    pub fn profile(profile: Profile, master_seed: u64) -> Self {
        let (datasets, n_samples, repetitions): (&[&str], usize, usize) = match profile {
            Profile::Desk => (&DATASET_NAMES[..3], 2000, 3),
            Profile::Full => (&DATASET_NAMES[..], 10_000, 10),
        };
        Self {
            datasets: datasets.iter().map(|s| s.to_string()).collect(),
            methods: Method::ALL.to_vec(),
            n_samples,
            n_restarts: None,
            repetitions,
            sigma: DEFAULT_SIGMA,
            lambda_a: 1.0,
            lambda_w: 1.0,
            master_seed,
            metrics: MetricFlags::default(),
            coverage_limit: DEFAULT_LIMIT,
            n_eps: DEFAULT_N_EPS,
            hmc: HmcConfig::default(),
            optimizer: OptimizerConfig::default(),
            output_dir: None,
        }
    }

    pub fn restarts(&self) -> usize {
        self.n_restarts.unwrap_or(self.n_samples)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.repetitions == 0 {
            return Err(Error::Config("n_samples and repetitions must be at least 1".into()));
        }
        if self.restarts() == 0 {
            return Err(Error::Config("n_restarts must be at least 1".into()));
        }
        if self.datasets.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("at least one dataset and one method are required".into()));
        }
        for name in &self.datasets {
            if !DATASET_NAMES.contains(&name.as_str()) {
                return Err(Error::Config(format!(
                    "unknown dataset {name:?}; expected one of {DATASET_NAMES:?}"
                )));
            }
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.lambda_a > 0.0) || !(self.lambda_w > 0.0) {
            return Err(Error::Config("prior rates must be positive".into()));
        }
        if self.coverage_limit == 0 || self.n_eps < 2 {
            return Err(Error::Config("coverage_limit ≥ 1 and n_eps ≥ 2 required".into()));
        }
        self.hmc.validate()?;
        self.optimizer.validate()?;
        // Cheap for small datasets; catches unknown names before any work.
        for name in &self.datasets {
            if !name.ends_with("_large") {
                by_name(name, self.master_seed)?;
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
