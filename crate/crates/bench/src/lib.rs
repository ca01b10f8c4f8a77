//! Fixed inputs for the benchmarks, built once per group.

use nmfcov_core::datasets::{laurberg, DEFAULT_SIGMA};
use nmfcov_core::rng::rng_from_seed;
use nmfcov_core::samplers::all_modes_baseline;
use nmfcov_core::similarity::ColumnCostMatrix;
use nmfcov_core::{Dataset, Factorization};
use rand::Rng;

pub fn two_mode_data() -> Dataset {
    laurberg(0.5)
        .and_then(|d| d.with_noise(DEFAULT_SIGMA, 1))
        .expect("fixed dataset")
}

/// All-modes samples on the two-mode data: two well separated clusters.
pub fn two_mode_samples(n: usize) -> Vec<Factorization> {
    all_modes_baseline(&two_mode_data(), DEFAULT_SIGMA, n, 2)
        .expect("baseline runs")
        .samples
}

pub fn random_costs(size: usize, count: usize) -> Vec<ColumnCostMatrix> {
    let mut rng = rng_from_seed(3);
    (0..count)
        .map(|_| {
            let rows: Vec<Vec<f64>> = (0..size)
                .map(|_| (0..size).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            ColumnCostMatrix::from_rows(&rows).expect("square")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_requested_sizes() {
        assert_eq!(two_mode_samples(5).len(), 5);
        let costs = random_costs(4, 3);
        assert_eq!(costs.len(), 3);
        assert_eq!(costs[0].size(), 4);
    }
}
