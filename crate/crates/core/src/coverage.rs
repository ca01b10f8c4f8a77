//! Diversity of a sample set: diameter, mean pairwise distance, and the
//! minimum covering number `C_ε` traced over a range of ε.
//!
//! Balls are closed (`d ≤ ε`), so `C_0` counts distinct points. The greedy
//! cover picks, at every step, the point whose ball holds the most still
//! uncovered points, lowest index first on ties.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::Factorization;
use crate::similarity::{distance_prepared, Measure, PreparedBasis};
use crate::stats::{mean, quartiles};

pub const DEFAULT_N_EPS: usize = 100;
pub const DEFAULT_LIMIT: usize = 1000;
pub const EXACT_COVER_MAX: usize = 20;

/// Symmetric pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
    pub measure: Option<Measure>,
}

impl DistanceMatrix {
    /// Fills the upper triangle from `f(i, j)`, `i < j`, and mirrors it.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self {
            n,
            d,
            measure: None,
        }
    }

    /// Points on a line under absolute difference.
    pub fn from_points_1d(points: &[f64]) -> Self {
        Self::from_fn(points.len(), |i, j| (points[i] - points[j]).abs())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.n..(i + 1) * self.n]
    }

    /// The leading `limit × limit` block (the first `limit` samples).
    pub fn truncated(&self, limit: usize) -> DistanceMatrix {
        if limit >= self.n {
            return self.clone();
        }
        let mut d = Vec::with_capacity(limit * limit);
        for i in 0..limit {
            d.extend_from_slice(&self.row(i)[..limit]);
        }
        DistanceMatrix {
            n: limit,
            d,
            measure: self.measure,
        }
    }
}

/// Distances between the (column-normalized) bases of every pair of samples.
/// Pairs are evaluated in parallel; the result does not depend on scheduling.
pub fn pairwise_distances(samples: &[Factorization], measure: Measure) -> Result<DistanceMatrix> {
    if samples.is_empty() {
        return Err(Error::DimensionMismatch("no samples".into()));
    }
    let shape = samples[0].a.shape();
    if let Some(bad) = samples.iter().find(|s| s.a.shape() != shape) {
        return Err(Error::DimensionMismatch(format!(
            "sample basis {:?} differs from {:?}",
            bad.a.shape(),
            shape
        )));
    }
    let prepared = samples
        .par_iter()
        .map(|s| PreparedBasis::new(&s.a))
        .collect::<Result<Vec<_>>>()?;
    pairwise_prepared(&prepared, measure)
}

pub fn pairwise_prepared(prepared: &[PreparedBasis], measure: Measure) -> Result<DistanceMatrix> {
    let n = prepared.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| distance_prepared(measure, &prepared[i], &prepared[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut d = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + 1 + k;
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    Ok(DistanceMatrix {
        n,
        d,
        measure: Some(measure),
    })
}

/// Diameter of the set; 0 for a single point.
pub fn max_dist(d: &DistanceMatrix) -> f64 {
    d.d.iter().copied().fold(0.0, f64::max)
}

/// Average over all `n²` ordered pairs, diagonal included.
pub fn mean_dist(d: &DistanceMatrix) -> f64 {
    if d.n == 0 {
        return 0.0;
    }
    d.d.iter().sum::<f64>() / (d.n * d.n) as f64
}

/// Each row's neighbours sorted by distance, for repeated ε queries.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    sorted: Vec<Vec<(f64, u32)>>,
}

impl NeighborIndex {
    pub fn new(d: &DistanceMatrix) -> Self {
        let n = d.len();
        let sorted = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row: Vec<(f64, u32)> =
                    d.row(i).iter().enumerate().map(|(j, &x)| (x, j as u32)).collect();
                row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                row
            })
            .collect();
        Self { sorted }
    }

    fn ball(&self, i: usize, epsilon: f64) -> &[(f64, u32)] {
        let row = &self.sorted[i];
        let end = row.partition_point(|&(x, _)| x <= epsilon);
        &row[..end]
    }

    /// Greedy set cover size at `epsilon`.
    pub fn greedy(&self, epsilon: f64) -> usize {
        let n = self.sorted.len();
        let mut gain: Vec<usize> = (0..n).map(|i| self.ball(i, epsilon).len()).collect();
        let mut covered = vec![false; n];
        let mut remaining = n;
        let mut centres = 0;
        while remaining > 0 {
            // max_by_key keeps the last maximum; scan manually for the first.
            let mut best = 0;
            for i in 1..n {
                if gain[i] > gain[best] {
                    best = i;
                }
            }
            centres += 1;
            for &(_, j) in self.ball(best, epsilon) {
                let j = j as usize;
                if covered[j] {
                    continue;
                }
                covered[j] = true;
                remaining -= 1;
                for &(_, k) in self.ball(j, epsilon) {
                    gain[k as usize] -= 1;
                }
            }
        }
        centres
    }
}

/// Greedy approximation of the minimum covering number; never below the optimum
/// and at most `H_n` times it.
pub fn covering_number_greedy(d: &DistanceMatrix, epsilon: f64) -> usize {
    NeighborIndex::new(d).greedy(epsilon)
}

/// Exact minimum covering number by branch and bound. Only for `n ≤ 20`.
pub fn covering_number_exact(d: &DistanceMatrix, epsilon: f64) -> Result<usize> {
    let n = d.len();
    if n > EXACT_COVER_MAX {
        return Err(Error::TooLarge {
            size: n,
            max: EXACT_COVER_MAX,
        });
    }
    if n == 0 {
        return Ok(0);
    }
    let balls: Vec<u32> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| d.get(i, j) <= epsilon)
                .fold(0u32, |m, j| m | (1 << j))
        })
        .collect();
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };

    fn feasible(balls: &[u32], full: u32, covered: u32, budget: usize) -> bool {
        if covered == full {
            return true;
        }
        if budget == 0 {
            return false;
        }
        // Some chosen centre must cover the lowest uncovered point.
        let target = (!covered & full).trailing_zeros();
        balls
            .iter()
            .filter(|&&b| b & (1 << target) != 0)
            .any(|&b| feasible(balls, full, covered | b, budget - 1))
    }

    let upper = NeighborIndex::new(d).greedy(epsilon);
    let mut k = 1;
    while k < upper {
        if feasible(&balls, full, 0, k) {
            return Ok(k);
        }
        k += 1;
    }
    Ok(upper)
}

/// `n_eps` evenly spaced values from 0 to `max` inclusive.
pub fn epsilon_grid(max: f64, n_eps: usize) -> Vec<f64> {
    match n_eps {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n_eps)
            .map(|k| {
                if k == n_eps - 1 {
                    max
                } else {
                    max * k as f64 / (n_eps - 1) as f64
                }
            })
            .collect(),
    }
}

/// Covering numbers of one sample set over an ε grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceCurve {
    pub epsilons: Vec<f64>,
    pub covering: Vec<f64>,
}

impl PersistenceCurve {
    /// Width of the ε range over which the curve equals `value`.
    pub fn plateau_width(&self, value: f64) -> f64 {
        let hits: Vec<f64> = self
            .epsilons
            .iter()
            .zip(&self.covering)
            .filter(|(_, &c)| c == value)
            .map(|(&e, _)| e)
            .collect();
        match (hits.first(), hits.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }
}

/// Curve on the first `limit` samples with ε from 0 to their diameter.
pub fn persistence_curve(d: &DistanceMatrix, n_eps: usize, limit: usize) -> PersistenceCurve {
    let d = d.truncated(limit);
    let grid = epsilon_grid(max_dist(&d), n_eps);
    persistence_curve_on_grid(&d, &grid)
}

/// Curve evaluated at caller-supplied ascending ε values (shared grids across
/// repetitions).
///
/// Greedy counts are not monotone in ε on their own. A cover found at a
/// smaller ε also covers at every larger ε, so each point takes the running
/// minimum, which still lies between the exact and greedy counts.
pub fn persistence_curve_on_grid(d: &DistanceMatrix, epsilons: &[f64]) -> PersistenceCurve {
    let index = NeighborIndex::new(d);
    let raw: Vec<usize> = epsilons.par_iter().map(|&e| index.greedy(e)).collect();
    let covering = raw
        .iter()
        .scan(usize::MAX, |best, &c| {
            *best = (*best).min(c);
            Some(*best as f64)
        })
        .collect();
    PersistenceCurve {
        epsilons: epsilons.to_vec(),
        covering,
    }
}

/// Pointwise mean and quartiles of curves sharing one ε grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub epsilons: Vec<f64>,
    pub mean: Vec<f64>,
    pub p25: Vec<f64>,
    pub p50: Vec<f64>,
    pub p75: Vec<f64>,
    pub repetitions: Vec<Vec<f64>>,
}

pub fn summarize_curves(curves: &[PersistenceCurve]) -> Result<CurveSummary> {
    let first = curves
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no curves to summarize".into()))?;
    if curves.iter().any(|c| c.epsilons != first.epsilons) {
        return Err(Error::DimensionMismatch("curves use different ε grids".into()));
    }
    let m = first.epsilons.len();
    let mut out = CurveSummary {
        epsilons: first.epsilons.clone(),
        mean: Vec::with_capacity(m),
        p25: Vec::with_capacity(m),
        p50: Vec::with_capacity(m),
        p75: Vec::with_capacity(m),
        repetitions: curves.iter().map(|c| c.covering.clone()).collect(),
    };
    for k in 0..m {
        let column: Vec<f64> = curves.iter().map(|c| c.covering[k]).collect();
        let (q1, q2, q3) = quartiles(&column);
        out.mean.push(mean(&column));
        out.p25.push(q1);
        out.p50.push(q2);
        out.p75.push(q3);
    }
    Ok(out)
}

pub const CURVE_CSV_HEADER: &str = "epsilon,covering_mean,covering_p25,covering_p50,covering_p75";

impl CurveSummary {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CURVE_CSV_HEADER);
        out.push('\n');
        for k in 0..self.epsilons.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.epsilons[k], self.mean[k], self.p25[k], self.p50[k], self.p75[k]
            );
        }
        out
    }

    /// Long format: one line per (repetition, ε).
    pub fn repetitions_csv(&self) -> String {
        let mut out = String::from("repetition,epsilon,covering\n");
        for (r, curve) in self.repetitions.iter().enumerate() {
            for (e, c) in self.epsilons.iter().zip(curve) {
                let _ = writeln!(out, "{r},{e},{c}");
            }
        }
        out
    }
}
