//! Square linear assignment: Kuhn–Munkres with potentials, plus an
//! exhaustive oracle for small sizes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a [`ColumnCostMatrix`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMetric {
    L1,
    AngleDegrees,
    Generic,
}

/// Square table `cost[i][j]` between column `i` of one basis and column `j` of another.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnCostMatrix {
    size: usize,
    cost: Vec<f64>,
    pub metric: CostMetric,
}

impl ColumnCostMatrix {
    pub fn new(size: usize, cost: Vec<f64>, metric: CostMetric) -> Result<Self> {
        if cost.len() != size * size {
            return Err(Error::DimensionMismatch(format!(
                "{} costs for a {size}x{size} table",
                cost.len()
            )));
        }
        Ok(Self { size, cost, metric })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let size = rows.len();
        let mut cost = Vec::with_capacity(size * size);
        for row in rows {
            let row = row.as_ref();
            if row.len() != size {
                return Err(Error::DimensionMismatch("cost table must be square".into()));
            }
            cost.extend_from_slice(row);
        }
        Self::new(size, cost, CostMetric::Generic)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.size + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.cost
    }

    /// Cost of a given assignment `i → perm[i]`.
    pub fn cost_of(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }

    pub fn transposed(&self) -> ColumnCostMatrix {
        let n = self.size;
        let cost = (0..n * n).map(|k| self.get(k % n, k / n)).collect();
        ColumnCostMatrix {
            size: n,
            cost,
            metric: self.metric,
        }
    }
}

/// Optimal assignment: row `i` is matched to column `permutation[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub permutation: Vec<usize>,
    pub total_cost: f64,
}

/// Minimum-cost perfect matching in O(R³).
pub fn hungarian(cost: &ColumnCostMatrix) -> Result<Assignment> {
    if cost.as_slice().iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite);
    }
    let permutation = solve_dense(cost.size(), cost.as_slice());
    let total_cost = cost.cost_of(&permutation);
    Ok(Assignment {
        permutation,
        total_cost,
    })
}

/// Shortest augmenting path with dual potentials (1-based sentinel column 0).
/// `cost` must be finite and `n × n` row-major.
pub(crate) fn solve_dense(n: usize, cost: &[f64]) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    // p[j]: row matched to column j (1-based, 0 = free)
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);

        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }

        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            perm[p[j] - 1] = j - 1;
        }
    }
    perm
}

pub const BRUTE_FORCE_MAX: usize = 8;

/// Exhaustive minimum over all `R!` permutations. The first minimizer in
/// lexicographic order wins ties.
pub fn brute_force_match(cost: &ColumnCostMatrix) -> Result<Assignment> {
    let n = cost.size();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge {
            size: n,
            max: BRUTE_FORCE_MAX,
        });
    }
    if cost.as_slice().iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut best = Assignment {
        permutation: (0..n).collect(),
        total_cost: f64::INFINITY,
    };
    let mut current = Vec::with_capacity(n);
    let mut taken = vec![false; n];
    search(cost, &mut current, &mut taken, 0.0, &mut best);
    Ok(best)
}

fn search(
    cost: &ColumnCostMatrix,
    current: &mut Vec<usize>,
    taken: &mut [bool],
    partial: f64,
    best: &mut Assignment,
) {
    if partial > best.total_cost {
        return;
    }
    let n = cost.size();
    let row = current.len();
    if row == n {
        // Recompute in row order so the total matches `cost_of` bit for bit.
        let total = cost.cost_of(current);
        if total < best.total_cost {
            best.total_cost = total;
            best.permutation.clone_from(current);
        }
        return;
    }
    for j in 0..n {
        if taken[j] {
            continue;
        }
        taken[j] = true;
        current.push(j);
        search(cost, current, taken, partial + cost.get(row, j), best);
        current.pop();
        taken[j] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_diagonal_gives_identity() {
        let c = ColumnCostMatrix::from_rows(&[[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
            .unwrap();
        let a = hungarian(&c).unwrap();
        assert_eq!(a.permutation, vec![0, 1, 2]);
        assert_eq!(a.total_cost, 0.0);
    }

    #[test]
    fn rank_one_cost_reverses() {
        // Brute force over 6 permutations: (3,2,1) costs 3+4+3 = 10, the minimum.
        let c = ColumnCostMatrix::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [3.0, 6.0, 9.0]])
            .unwrap();
        let a = hungarian(&c).unwrap();
        assert_eq!(a.permutation, vec![2, 1, 0]);
        assert_eq!(a.total_cost, 10.0);
        assert_eq!(brute_force_match(&c).unwrap(), a);
    }

    #[test]
    fn singleton() {
        let c = ColumnCostMatrix::from_rows(&[[7.0]]).unwrap();
        let a = hungarian(&c).unwrap();
        assert_eq!(a.permutation, vec![0]);
        assert_eq!(a.total_cost, 7.0);
    }

    #[test]
    fn non_finite_rejected() {
        let c = ColumnCostMatrix::from_rows(&[[0.0, f64::NAN], [1.0, 0.0]]).unwrap();
        assert_eq!(hungarian(&c), Err(Error::NonFinite));
        let c = ColumnCostMatrix::from_rows(&[[0.0, f64::INFINITY], [1.0, 0.0]]).unwrap();
        assert_eq!(brute_force_match(&c), Err(Error::NonFinite));
    }

    #[test]
    fn brute_force_edge_cases() {
        let c = ColumnCostMatrix::new(4, vec![2.5; 16], CostMetric::Generic).unwrap();
        assert_eq!(brute_force_match(&c).unwrap().total_cost, 10.0);
        let c = ColumnCostMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let a = brute_force_match(&c).unwrap();
        assert_eq!(a.permutation, vec![0, 1]);
        assert_eq!(a.total_cost, 0.0);
        let big = ColumnCostMatrix::new(9, vec![0.0; 81], CostMetric::Generic).unwrap();
        assert_eq!(
            brute_force_match(&big),
            Err(Error::TooLarge { size: 9, max: 8 })
        );
    }

    #[test]
    fn agrees_with_brute_force_on_random_5x5() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let cost = (0..25).map(|_| rng.random_range(0.0..10.0)).collect();
            let c = ColumnCostMatrix::new(5, cost, CostMetric::Generic).unwrap();
            let h = hungarian(&c).unwrap();
            let b = brute_force_match(&c).unwrap();
            assert!((h.total_cost - b.total_cost).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_still_give_a_valid_permutation() {
        let c = ColumnCostMatrix::new(6, vec![1.0; 36], CostMetric::Generic).unwrap();
        let mut perm = hungarian(&c).unwrap().permutation;
        perm.sort_unstable();
        assert_eq!(perm, (0..6).collect::<Vec<_>>());
    }
}
