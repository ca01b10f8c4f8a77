//! The sampled parameter state `(A, W)` with `X ≈ A·W`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{normalize_columns, Matrix, Norm};

/// A nonnegative factorization: basis `a` (D×R) and weights `w` (R×N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    pub a: Matrix,
    pub w: Matrix,
}

impl Factorization {
    /// Checks conformity and nonnegativity.
    pub fn new(a: Matrix, w: Matrix) -> Result<Self> {
        let f = Self::new_unchecked_sign(a, w)?;
        if let Some(idx) = f.a.as_slice().iter().position(|&x| x < 0.0) {
            return Err(Error::NegativeEntry(idx));
        }
        if let Some(idx) = f.w.as_slice().iter().position(|&x| x < 0.0) {
            return Err(Error::NegativeEntry(f.a.as_slice().len() + idx));
        }
        Ok(f)
    }

    /// Checks conformity only. Used for intermediate states such as `A·Q`
    /// before nonnegativity has been established.
    pub fn new_unchecked_sign(a: Matrix, w: Matrix) -> Result<Self> {
        if a.cols() != w.rows() {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} columns but weights have {} rows",
                a.cols(),
                w.rows()
            )));
        }
        Ok(Self { a, w })
    }

    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    /// (D, R, N)
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.rows(), self.a.cols(), self.w.cols())
    }

    pub fn product(&self) -> Matrix {
        self.a.matmul(&self.w).expect("factorization dims checked at construction")
    }

    pub fn is_nonnegative(&self) -> bool {
        self.a.is_nonnegative() && self.w.is_nonnegative()
    }

    /// Number of free parameters, `D·R + R·N`.
    pub fn len(&self) -> usize {
        self.a.as_slice().len() + self.w.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenates `A` then `W`, both row-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(self.a.as_slice());
        v.extend_from_slice(self.w.as_slice());
        v
    }

    pub fn from_flat(d: usize, r: usize, n: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != d * r + r * n {
            return Err(Error::DimensionMismatch(format!(
                "flat vector of length {} for D={d}, R={r}, N={n}",
                flat.len()
            )));
        }
        let a = Matrix::from_row_major(d, r, flat[..d * r].to_vec())?;
        let w = Matrix::from_row_major(r, n, flat[d * r..].to_vec())?;
        Self::new_unchecked_sign(a, w)
    }

    /// Applies a column permutation to `A` and the matching row permutation to `W`.
    pub fn permuted(&self, perm: &[usize]) -> Factorization {
        Factorization {
            a: self.a.permute_columns(perm),
            w: self.w.permute_rows(perm),
        }
    }
}

/// Rescales the columns of `A` to unit norm and folds the scales into the rows of `W`.
pub fn canonicalize(f: &Factorization, norm: Norm) -> Result<Factorization> {
    let (a, scales) = normalize_columns(&f.a, norm)?;
    let w = f.w.scale_rows(&scales);
    Ok(Factorization { a, w })
}

/// Frobenius norm of `X − A·W`.
pub fn reconstruction_error(x: &Matrix, f: &Factorization) -> Result<f64> {
    check_conforms(x, f)?;
    Ok(x.sub(&f.product())?.frobenius_norm())
}

pub(crate) fn check_conforms(x: &Matrix, f: &Factorization) -> Result<()> {
    let (d, _, n) = f.dims();
    if x.shape() != (d, n) {
        return Err(Error::DimensionMismatch(format!(
            "data is {}x{} but factorization produces {d}x{n}",
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}
