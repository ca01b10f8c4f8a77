//! Synthetic datasets with known exact factorizations.
//!
//! Three small matrices with qualitatively different solution sets (one
//! equivalence class, two classes, and a one-parameter family), plus random
//! nonnegative embeddings `B₁·X·B₂` into larger dimensions that carry the
//! known solutions along.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{reconstruction_error, Factorization};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from_seed};

pub const DEFAULT_SIGMA: f64 = 0.01;
pub const LARGE_ROWS: usize = 500;
pub const LARGE_COLS: usize = 50;

const EMBED_MAX_ATTEMPTS: usize = 100;
const EMBED_MIN_SINGULAR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    Unique,
    TwoModes,
    InfiniteModes,
}

/// Picks one known solution out of a [`SolutionStructure`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Index into the discrete solution list.
    Index(usize),
    /// Position along the solution segment of an infinite family.
    Delta(f64),
}

/// Known exact solutions of a dataset.
///
/// For `InfiniteModes`, `solutions` holds the two endpoints `δ = 0` and
/// `δ = 1`; every point of the family is their entrywise affine combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionStructure {
    pub kind: SolutionKind,
    pub solutions: Vec<Factorization>,
}

impl SolutionStructure {
    pub fn solution(&self, mode: Mode) -> Result<Factorization> {
        match (self.kind, mode) {
            (SolutionKind::InfiniteModes, Mode::Delta(delta)) => self.at_delta(delta),
            (SolutionKind::InfiniteModes, Mode::Index(i)) => match i {
                0 => self.at_delta(0.0),
                1 => self.at_delta(1.0),
                _ => Err(Error::DomainError {
                    value: i as f64,
                    domain: "mode index in {0, 1}",
                }),
            },
            (_, Mode::Index(i)) => self.solutions.get(i).cloned().ok_or(Error::DomainError {
                value: i as f64,
                domain: "mode index within the known solution list",
            }),
            (_, Mode::Delta(delta)) => Err(Error::DomainError {
                value: delta,
                domain: "delta applies only to infinite solution families",
            }),
        }
    }

    fn at_delta(&self, delta: f64) -> Result<Factorization> {
        check_delta(delta)?;
        let (lo, hi) = (&self.solutions[0], &self.solutions[1]);
        let lerp = |x: &Matrix, y: &Matrix| {
            Matrix::from_fn(x.rows(), x.cols(), |i, j| {
                (1.0 - delta) * x[(i, j)] + delta * y[(i, j)]
            })
        };
        Ok(Factorization {
            a: lerp(&lo.a, &hi.a),
            w: lerp(&lo.w, &hi.w),
        })
    }

    /// The mode pinned by the harness for mode-trapping runs.
    pub fn default_mode(&self) -> Mode {
        match self.kind {
            SolutionKind::InfiniteModes => Mode::Delta(0.5),
            _ => Mode::Index(0),
        }
    }

    /// Draws a mode uniformly: a coin over discrete solutions, or `δ ~ U[0, 1]`.
    pub fn random_mode<R: Rng + ?Sized>(&self, rng: &mut R) -> Mode {
        match self.kind {
            SolutionKind::Unique => Mode::Index(0),
            SolutionKind::TwoModes => Mode::Index(rng.random_range(0..self.solutions.len())),
            SolutionKind::InfiniteModes => Mode::Delta(rng.random::<f64>()),
        }
    }
}

/// Observed data plus ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: String,
    pub x: Matrix,
    pub rank: usize,
    pub structure: SolutionStructure,
    pub sigma_noise: f64,
    pub noise_seed: Option<u64>,
    pub x_noisy: Option<Matrix>,
}

impl Dataset {
    /// The matrix samplers should see: `X̃` if noise was added, otherwise `X`.
    pub fn observed(&self) -> &Matrix {
        self.x_noisy.as_ref().unwrap_or(&self.x)
    }

    pub fn with_noise(mut self, sigma: f64, seed: u64) -> Result<Self> {
        self.x_noisy = Some(add_noise(&self.x, sigma, seed)?);
        self.sigma_noise = sigma;
        self.noise_seed = Some(seed);
        Ok(self)
    }

    pub fn solution(&self, mode: Mode) -> Result<Factorization> {
        self.structure.solution(mode)
    }

    /// Largest reconstruction error of the stored solutions against clean `X`.
    pub fn max_solution_error(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for f in &self.structure.solutions {
            worst = worst.max(reconstruction_error(&self.x, f)?);
        }
        Ok(worst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// The 3×6 weight matrix of Laurberg's example.
pub fn laurberg_weights(a: f64) -> Matrix {
    Matrix::from_rows(&[
        [a, 1.0, 1.0, a, 0.0, 0.0],
        [1.0, a, 0.0, 0.0, a, 1.0],
        [0.0, 0.0, a, 1.0, 1.0, a],
    ])
}

/// Involutory change of basis relating the two solutions at `a = 0.5`.
pub fn laurberg_q() -> Matrix {
    Matrix::from_rows(&[[-1.0, 2.0, 2.0], [2.0, -1.0, 2.0], [2.0, 2.0, -1.0]]).scale(1.0 / 3.0)
}

/// Laurberg's 6×6 example `X = A·W` with `A = Wᵀ`.
///
/// `a = 0.3` has a unique solution class; `a = 0.5` has two, related by
/// [`laurberg_q`]. Other values are rejected because their solution sets are
/// not known in closed form.
pub fn laurberg(a: f64) -> Result<Dataset> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::DomainError {
            value: a,
            domain: "(0, 1]",
        });
    }
    let w = laurberg_weights(a);
    let base = Factorization::new(w.transpose(), w)?;
    let x = base.product();
    let (id, structure) = if (a - 0.3).abs() < 1e-15 {
        (
            "unique",
            SolutionStructure {
                kind: SolutionKind::Unique,
                solutions: vec![base],
            },
        )
    } else if (a - 0.5).abs() < 1e-15 {
        let q = laurberg_q();
        // Entries of A·Q and Q·W are exact multiples of 1/6 up to rounding;
        // clamp the rounding residue so the solution is nonnegative as stored.
        let aq = base.a.matmul(&q)?.map(clean_zero);
        let qw = q.matmul(&base.w)?.map(clean_zero);
        let second = Factorization::new(aq, qw)?;
        (
            "two_modes",
            SolutionStructure {
                kind: SolutionKind::TwoModes,
                solutions: vec![base, second],
            },
        )
    } else {
        return Err(Error::UnsupportedStructure(a));
    };
    Ok(Dataset {
        id: id.to_string(),
        x,
        rank: 3,
        structure,
        sigma_noise: 0.0,
        noise_seed: None,
        x_noisy: None,
    })
}

fn clean_zero(v: f64) -> f64 {
    if v.abs() < 1e-14 {
        0.0
    } else {
        v
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&delta) {
        Ok(())
    } else {
        Err(Error::DomainError {
            value: delta,
            domain: "[0, 1]",
        })
    }
}

fn infinite_weights() -> Matrix {
    Matrix::from_rows(&[
        [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
        [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
    ])
}

/// The 7×6 basis `A_δ`: identity on the first six rows, last row
/// `(1−δ, 1−δ, 1−δ, δ, δ, δ)`.
fn infinite_basis(delta: f64) -> Matrix {
    let mut a = Matrix::zeros(7, 6);
    for i in 0..6 {
        a[(i, i)] = 1.0;
    }
    for j in 0..6 {
        a[(6, j)] = if j < 3 { 1.0 - delta } else { delta };
    }
    a
}

/// One member `(A_δ, W)` of the infinite solution family.
pub fn solution_at_delta(delta: f64) -> Result<Factorization> {
    check_delta(delta)?;
    Factorization::new(infinite_basis(delta), infinite_weights())
}

/// The 7×9 rank-6 matrix whose exact factorizations form a segment in `δ`.
pub fn infinite_dataset() -> Dataset {
    let w = infinite_weights();
    // X is the six indicator rows of W plus a row of ones.
    let mut rows = w.to_rows();
    rows.push(vec![1.0; 9]);
    let x = Matrix::from_rows(&rows);
    let solutions = vec![
        solution_at_delta(0.0).expect("delta in range"),
        solution_at_delta(1.0).expect("delta in range"),
    ];
    Dataset {
        id: "infinite".to_string(),
        x,
        rank: 6,
        structure: SolutionStructure {
            kind: SolutionKind::InfiniteModes,
            solutions,
        },
        sigma_noise: 0.0,
        noise_seed: None,
        x_noisy: None,
    }
}

/// Maps a dataset through fixed `B₁` (D_large×D) and `B₂` (N×N_large):
/// `X ↦ B₁XB₂`, `A ↦ B₁A`, `W ↦ WB₂`. Noise, if any, is dropped.
pub fn embed_with(d: &Dataset, b1: &Matrix, b2: &Matrix) -> Result<Dataset> {
    if !b1.is_nonnegative() || !b2.is_nonnegative() {
        return Err(Error::DomainError {
            value: b1.min_entry().min(b2.min_entry()),
            domain: "nonnegative embedding matrices",
        });
    }
    let x = b1.matmul(&d.x)?.matmul(b2)?;
    let solutions = d
        .structure
        .solutions
        .iter()
        .map(|f| Factorization::new(b1.matmul(&f.a)?, f.w.matmul(b2)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        id: d.id.clone(),
        x,
        rank: d.rank,
        structure: SolutionStructure {
            kind: d.structure.kind,
            solutions,
        },
        sigma_noise: 0.0,
        noise_seed: None,
        x_noisy: None,
    })
}

/// Random nonnegative embedding with i.i.d. `U[0, 1]` entries, redrawn until
/// both maps are numerically full rank.
pub fn embed_large(d: &Dataset, rows: usize, cols: usize, seed: u64) -> Result<Dataset> {
    let (small_rows, small_cols) = d.x.shape();
    if rows < small_rows || cols < small_cols {
        return Err(Error::DimensionMismatch(format!(
            "cannot embed {small_rows}x{small_cols} into {rows}x{cols}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut draw_full_rank = |r: usize, c: usize| -> Result<Matrix> {
        for _ in 0..EMBED_MAX_ATTEMPTS {
            let b = Matrix::from_fn(r, c, |_, _| rng.random::<f64>());
            if b.min_singular_value() > EMBED_MIN_SINGULAR {
                return Ok(b);
            }
        }
        Err(Error::RankDeficient(EMBED_MAX_ATTEMPTS))
    };
    let b1 = draw_full_rank(rows, small_rows)?;
    let b2 = draw_full_rank(small_cols, cols)?;
    let mut out = embed_with(d, &b1, &b2)?;
    out.id = format!("{}_large", d.id);
    Ok(out)
}

/// `X + E` with `E` i.i.d. `Normal(0, σ²)`. Not clipped.
pub fn add_noise(x: &Matrix, sigma: f64, seed: u64) -> Result<Matrix> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::DomainError {
            value: sigma,
            domain: "sigma >= 0",
        });
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let mut rng = rng_from_seed(seed);
    Ok(add_noise_with(x, sigma, &mut rng))
}

pub(crate) fn add_noise_with<R: Rng + ?Sized>(x: &Matrix, sigma: f64, rng: &mut R) -> Matrix {
    if sigma == 0.0 {
        return x.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    x.map(|v| v + normal.sample(rng))
}

/// Dataset names accepted by the harness and CLI.
pub const DATASET_NAMES: [&str; 6] = [
    "unique",
    "two_modes",
    "infinite",
    "unique_large",
    "two_modes_large",
    "infinite_large",
];

/// Builds a clean dataset by name. Large variants derive their embedding from `seed`.
pub fn by_name(name: &str, seed: u64) -> Result<Dataset> {
    let (base, large) = match name.strip_suffix("_large") {
        Some(b) => (b, true),
        None => (name, false),
    };
    let small = match base {
        "unique" => laurberg(0.3)?,
        "two_modes" => laurberg(0.5)?,
        "infinite" => infinite_dataset(),
        other => return Err(Error::Config(format!("unknown dataset {other:?}"))),
    };
    if large {
        let mut d = embed_large(&small, LARGE_ROWS, LARGE_COLS, derive_seed(seed, &["embed", base]))?;
        d.id = name.to_string();
        Ok(d)
    } else {
        Ok(small)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laurberg_first_entry() {
        let d = laurberg(0.3).unwrap();
        assert!((d.x[(0, 0)] - 1.09).abs() < 1e-15);
        assert_eq!(d.x.shape(), (6, 6));
        assert_eq!(d.structure.kind, SolutionKind::Unique);
        assert!(d.max_solution_error().unwrap() <= 1e-12);
    }

    #[test]
    fn q_is_involution() {
        let q = laurberg_q();
        assert!(q.matmul(&q).unwrap().max_abs_diff(&Matrix::identity(3)) < 1e-12);
    }

    #[test]
    fn two_mode_solutions_are_exact_and_nonnegative() {
        let d = laurberg(0.5).unwrap();
        assert_eq!(d.structure.solutions.len(), 2);
        for f in &d.structure.solutions {
            assert!(f.is_nonnegative());
        }
        assert!(d.max_solution_error().unwrap() <= 1e-12);
    }

    #[test]
    fn laurberg_rejects_unknown_structure() {
        assert_eq!(laurberg(0.4).unwrap_err(), Error::UnsupportedStructure(0.4));
        assert!(matches!(laurberg(0.0), Err(Error::DomainError { .. })));
    }

    #[test]
    fn infinite_row_sums() {
        let d = infinite_dataset();
        let sums: Vec<f64> = (0..7).map(|i| d.x.row(i).iter().sum()).collect();
        assert_eq!(sums, vec![3.0, 3.0, 3.0, 3.0, 3.0, 3.0, 9.0]);
    }

    #[test]
    fn solution_family_endpoints_and_midpoint() {
        let d = infinite_dataset();
        let s0 = solution_at_delta(0.0).unwrap();
        let s1 = solution_at_delta(1.0).unwrap();
        assert_eq!(s0.a.row(6), &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s1.a.row(6), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(solution_at_delta(0.5).unwrap().a.row(6), &[0.5; 6]);
        for delta in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let f = solution_at_delta(delta).unwrap();
            assert!(reconstruction_error(&d.x, &f).unwrap() <= 1e-12);
            let via_structure = d.solution(Mode::Delta(delta)).unwrap();
            assert!(via_structure.a.max_abs_diff(&f.a) < 1e-15);
        }
        let mid = solution_at_delta(0.5).unwrap();
        let avg = s0.a.add(&s1.a).unwrap().scale(0.5);
        assert_eq!(mid.a, avg);
    }

    #[test]
    fn delta_out_of_range() {
        assert!(matches!(solution_at_delta(1.5), Err(Error::DomainError { .. })));
        assert!(matches!(solution_at_delta(-0.1), Err(Error::DomainError { .. })));
    }

    #[test]
    fn identity_embedding_is_noop() {
        let d = laurberg(0.5).unwrap();
        let e = embed_with(&d, &Matrix::identity(6), &Matrix::identity(6)).unwrap();
        assert_eq!(e.x, d.x);
    }

    #[test]
    fn large_embedding_is_exact_and_deterministic() {
        let d = infinite_dataset();
        let e1 = embed_large(&d, 500, 50, 42).unwrap();
        let e2 = embed_large(&d, 500, 50, 42).unwrap();
        assert_eq!(e1.x, e2.x);
        assert_eq!(e1.x.shape(), (500, 50));
        assert!(e1.max_solution_error().unwrap() <= 1e-9);
        let mid = e1.solution(Mode::Delta(0.3)).unwrap();
        assert!(reconstruction_error(&e1.x, &mid).unwrap() <= 1e-9);
    }

    #[test]
    fn embedding_rejects_shrinking() {
        let d = laurberg(0.3).unwrap();
        assert!(embed_large(&d, 5, 50, 1).is_err());
    }

    #[test]
    fn noise_behaviour() {
        let x = Matrix::filled(3, 4, 2.0);
        assert_eq!(add_noise(&x, 0.0, 1).unwrap(), x);
        assert_eq!(add_noise(&x, 0.1, 9).unwrap(), add_noise(&x, 0.1, 9).unwrap());
        assert_ne!(add_noise(&x, 0.1, 9).unwrap(), add_noise(&x, 0.1, 10).unwrap());
        assert!(add_noise(&x, -1.0, 1).is_err());
    }

    #[test]
    fn noise_mean_is_centred() {
        let sigma = 0.5;
        let x = Matrix::zeros(1000, 1000);
        let e = add_noise(&x, sigma, 2024).unwrap();
        let mean = e.as_slice().iter().sum::<f64>() / 1e6;
        assert!(mean.abs() < 3.0 * sigma / 1e3, "mean {mean}");
    }

    #[test]
    fn json_bundle_round_trip() {
        let d = laurberg(0.5).unwrap().with_noise(0.01, 3).unwrap();
        let back = Dataset::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn names_resolve() {
        for name in DATASET_NAMES.iter().take(3) {
            assert_eq!(by_name(name, 0).unwrap().id, *name);
        }
        assert!(by_name("bogus", 0).is_err());
    }
}
