//! Sample generators: Gibbs, HMC, perturb-and-factor baselines and
//! optimizer restarts.

mod baselines;
mod chain;
mod gibbs;
mod hmc;
mod restarts;

pub use baselines::{all_modes_baseline, all_modes_baseline_with, one_mode_baseline, one_mode_baseline_with};
pub use chain::{ChainMeta, Method, SampleChain};
pub use gibbs::{gibbs_chain, GibbsSampler};
pub use hmc::{hmc_chain, hmc_sample, leapfrog, HmcConfig, HmcRun, Target, DIVERGENCE_THRESHOLD, ZERO_OFFSET};
pub use restarts::{filter_by_threshold, filter_restarts, random_restarts, FILTER_FACTOR};
