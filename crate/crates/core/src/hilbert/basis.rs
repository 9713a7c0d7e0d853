use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::density::max_abs_diff;
use crate::error::{Error, Result};

pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Orthonormal basis of one factor's space: the columns of a unitary matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis {
    vectors: DMatrix<Complex64>,
    factor_label: String,
}

impl OrthonormalBasis {
    pub fn new(vectors: DMatrix<Complex64>, factor_label: impl Into<String>) -> Result<Self> {
        if vectors.nrows() != vectors.ncols() {
            return Err(Error::DimensionMismatch {
                expected: vectors.nrows(),
                found: vectors.ncols(),
            });
        }
        let dev = orthonormality_defect(&vectors);
        if dev > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(dev));
        }
        Ok(Self {
            vectors,
            factor_label: factor_label.into(),
        })
    }

    pub fn computational(dim: usize, factor_label: impl Into<String>) -> Self {
        Self {
            vectors: DMatrix::identity(dim, dim),
            factor_label: factor_label.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn factor_label(&self) -> &str {
        &self.factor_label
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    pub fn vector(&self, k: usize) -> DVector<Complex64> {
        self.vectors.column(k).into_owned()
    }

    pub fn relabeled(mut self, label: impl Into<String>) -> Self {
        self.factor_label = label.into();
        self
    }

    /// Same vectors in a different order: column `k` of the result is column
    /// `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.dim();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::param("perm", "not a permutation of the basis indices"));
        }
        Ok(Self {
            vectors: DMatrix::from_fn(n, n, |r, c| self.vectors[(r, perm[c])]),
            factor_label: self.factor_label.clone(),
        })
    }

    pub fn is_identity(&self) -> bool {
        let n = self.dim();
        max_abs_diff(&self.vectors, &DMatrix::identity(n, n)) == 0.0
    }
}

/// `‖B†B − I‖_max`.
pub fn orthonormality_defect(b: &DMatrix<Complex64>) -> f64 {
    let n = b.ncols();
    max_abs_diff(&(b.adjoint() * b), &DMatrix::identity(n, n))
}
