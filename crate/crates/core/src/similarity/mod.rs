//! Dissimilarity between basis matrices that is blind to column order and
//! column scale: ℓ₁ minimum matching distance and maximum angle.
//!
//! Both measures first normalize columns (ℓ₁ or ℓ₂), build an R×R table of
//! per-column costs and solve the assignment problem over it. A column that is
//! entirely zero is kept as is; it sits at ℓ₁ distance 2 and at 90° from every
//! nonzero column, and at distance 0 from another zero column.

mod assignment;

pub use assignment::{
    brute_force_match, hungarian, Assignment, ColumnCostMatrix, CostMetric, BRUTE_FORCE_MAX,
};
use assignment::solve_dense;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Which sample-to-sample measure to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Per-column ℓ₁ minimum matching distance, in `[0, 2]`.
    L1MinMatch,
    /// Maximum angle under the angle-sum-minimizing matching, in degrees.
    MaxAngle,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::MaxAngle, Measure::L1MinMatch];

    pub fn name(self) -> &'static str {
        match self {
            Measure::L1MinMatch => "l1",
            Measure::MaxAngle => "angle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "l1" | "l1_minmatch" | "mm_l1" => Ok(Measure::L1MinMatch),
            "angle" | "max_angle" => Ok(Measure::MaxAngle),
            other => Err(Error::Config(format!("unknown measure {other:?}"))),
        }
    }
}

/// Column-normalized copies of a basis, computed once per sample.
#[derive(Debug, Clone)]
pub struct PreparedBasis {
    dim: usize,
    rank: usize,
    /// Column-major ℓ₁-normalized columns.
    l1: Vec<f64>,
    /// Column-major ℓ₂-normalized columns.
    l2: Vec<f64>,
    zero: Vec<bool>,
}

impl PreparedBasis {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::NonFinite);
        }
        let (dim, rank) = a.shape();
        let mut l1 = Vec::with_capacity(dim * rank);
        let mut l2 = Vec::with_capacity(dim * rank);
        let mut zero = Vec::with_capacity(rank);
        for j in 0..rank {
            let col = a.column(j);
            let n1: f64 = col.iter().map(|x| x.abs()).sum();
            let n2: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            let is_zero = n1 == 0.0;
            zero.push(is_zero);
            if is_zero {
                l1.extend(col.iter().copied());
                l2.extend(col.iter().copied());
            } else {
                l1.extend(col.iter().map(|x| x / n1));
                l2.extend(col.iter().map(|x| x / n2));
            }
        }
        Ok(Self {
            dim,
            rank,
            l1,
            l2,
            zero,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.dim, self.rank)
    }

    fn l1_col(&self, j: usize) -> &[f64] {
        &self.l1[j * self.dim..(j + 1) * self.dim]
    }

    fn l2_col(&self, j: usize) -> &[f64] {
        &self.l2[j * self.dim..(j + 1) * self.dim]
    }

    fn check_same_shape(&self, other: &PreparedBasis) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "bases are {}x{} and {}x{}",
                self.dim, self.rank, other.dim, other.rank
            )));
        }
        Ok(())
    }
}

/// Angle between two unit vectors in degrees, via `2·atan2(|u−v|, |u+v|)`,
/// which stays accurate for nearly parallel columns where `acos` does not.
fn unit_angle_degrees(u: &[f64], v: &[f64]) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    let theta = 2.0 * diff.sqrt().atan2(sum.sqrt());
    theta.to_degrees().clamp(0.0, 90.0)
}

pub fn l1_cost_matrix(a: &PreparedBasis, b: &PreparedBasis) -> Result<ColumnCostMatrix> {
    a.check_same_shape(b)?;
    let r = a.rank;
    let mut cost = Vec::with_capacity(r * r);
    for i in 0..r {
        for j in 0..r {
            let c = match (a.zero[i], b.zero[j]) {
                (true, true) => 0.0,
                (true, false) | (false, true) => 2.0,
                (false, false) => a
                    .l1_col(i)
                    .iter()
                    .zip(b.l1_col(j))
                    .map(|(x, y)| (x - y).abs())
                    .sum(),
            };
            cost.push(c);
        }
    }
    ColumnCostMatrix::new(r, cost, CostMetric::L1)
}

pub fn angle_cost_matrix(a: &PreparedBasis, b: &PreparedBasis) -> Result<ColumnCostMatrix> {
    a.check_same_shape(b)?;
    let r = a.rank;
    let mut cost = Vec::with_capacity(r * r);
    for i in 0..r {
        for j in 0..r {
            let c = match (a.zero[i], b.zero[j]) {
                (true, true) => 0.0,
                (true, false) | (false, true) => 90.0,
                (false, false) => unit_angle_degrees(a.l2_col(i), b.l2_col(j)),
            };
            cost.push(c);
        }
    }
    ColumnCostMatrix::new(r, cost, CostMetric::AngleDegrees)
}

/// Optimal total ℓ₁ distance over column matchings, without the `1/R` factor.
pub fn min_match_l1_total_prepared(a: &PreparedBasis, b: &PreparedBasis) -> Result<f64> {
    let cost = l1_cost_matrix(a, b)?;
    Ok(hungarian(&cost)?.total_cost)
}

pub fn min_match_l1_prepared(a: &PreparedBasis, b: &PreparedBasis) -> Result<f64> {
    Ok(min_match_l1_total_prepared(a, b)? / a.rank as f64)
}

/// Largest matched angle under an angle-sum-minimizing assignment.
///
/// Several assignments can share the minimal sum (in two dimensions angles
/// add along the circle, so ties are common). Among assignments within
/// `ANGLE_SUM_TIE_TOL` of the optimum the smallest maximum is reported, which
/// keeps the measure symmetric in its arguments.
pub fn max_angle_prepared(a: &PreparedBasis, b: &PreparedBasis) -> Result<f64> {
    let cost = angle_cost_matrix(a, b)?;
    let matching = hungarian(&cost)?;
    let n = cost.size();
    let bound = matching.total_cost + ANGLE_SUM_TIE_TOL;
    let mut best = bottleneck(&cost, &matching.permutation);
    let mut masked = cost.as_slice().to_vec();
    loop {
        for (m, &c) in masked.iter_mut().zip(cost.as_slice()) {
            if c >= best {
                *m = EXCLUDED_ANGLE;
            }
        }
        let perm = solve_dense(n, &masked);
        if cost.cost_of(&perm) > bound || perm.iter().enumerate().any(|(i, &j)| cost.get(i, j) >= best) {
            return Ok(best);
        }
        best = bottleneck(&cost, &perm);
    }
}

const ANGLE_SUM_TIE_TOL: f64 = 1e-9;
// Larger than any sum of R right angles for realistic R.
const EXCLUDED_ANGLE: f64 = 1e9;

fn bottleneck(cost: &ColumnCostMatrix, perm: &[usize]) -> f64 {
    perm.iter()
        .enumerate()
        .map(|(i, &j)| cost.get(i, j))
        .fold(0.0, f64::max)
}

pub fn distance_prepared(measure: Measure, a: &PreparedBasis, b: &PreparedBasis) -> Result<f64> {
    match measure {
        Measure::L1MinMatch => min_match_l1_prepared(a, b),
        Measure::MaxAngle => max_angle_prepared(a, b),
    }
}

/// ℓ₁ minimum matching distance averaged per column; lies in `[0, 2]`.
pub fn min_match_l1(a: &Matrix, b: &Matrix) -> Result<f64> {
    min_match_l1_prepared(&PreparedBasis::new(a)?, &PreparedBasis::new(b)?)
}

/// The unnormalized variant: optimal total over columns, in `[0, 2R]`.
pub fn min_match_l1_total(a: &Matrix, b: &Matrix) -> Result<f64> {
    min_match_l1_total_prepared(&PreparedBasis::new(a)?, &PreparedBasis::new(b)?)
}

/// Maximum angle similarity in degrees, in `[0, 90]`.
pub fn max_angle(a: &Matrix, b: &Matrix) -> Result<f64> {
    max_angle_prepared(&PreparedBasis::new(a)?, &PreparedBasis::new(b)?)
}

pub fn distance(measure: Measure, a: &Matrix, b: &Matrix) -> Result<f64> {
    distance_prepared(measure, &PreparedBasis::new(a)?, &PreparedBasis::new(b)?)
}
