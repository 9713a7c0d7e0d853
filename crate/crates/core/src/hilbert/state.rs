use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{DensityMatrix, SpaceFactorization};
use crate::error::{Error, Result};

/// Complex amplitude vector over a factored space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<Complex64>,
    space: SpaceFactorization,
}

impl StateVector {
    pub fn new(amplitudes: DVector<Complex64>, space: SpaceFactorization) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dim(),
                found: amplitudes.len(),
            });
        }
        Ok(Self { amplitudes, space })
    }

    pub fn from_vec(amplitudes: Vec<Complex64>, space: SpaceFactorization) -> Result<Self> {
        Self::new(DVector::from_vec(amplitudes), space)
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(index: usize, space: SpaceFactorization) -> Result<Self> {
        let n = space.total_dim();
        if index >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: index + 1,
            });
        }
        let mut v = DVector::zeros(n);
        v[index] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amplitudes: v,
            space,
        })
    }

    pub(crate) fn from_parts(amplitudes: DVector<Complex64>, space: SpaceFactorization) -> Self {
        debug_assert_eq!(amplitudes.len(), space.total_dim());
        Self { amplitudes, space }
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn space(&self) -> &SpaceFactorization {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    /// Returns `ψ/‖ψ‖`, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0).then(|| Self {
            amplitudes: self.amplitudes.unscale(n),
            space: self.space.clone(),
        })
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Kronecker product; the factorization is the concatenation.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let space = self.space.concat(&other.space)?;
        let (n, m) = (self.dim(), other.dim());
        let mut out = DVector::zeros(n * m);
        for i in 0..n {
            let a = self.amplitudes[i];
            for j in 0..m {
                out[i * m + j] = a * other.amplitudes[j];
            }
        }
        Ok(Self::from_parts(out, space))
    }

    /// Applies a matrix acting on the whole space.
    pub fn apply(&self, op: &DMatrix<Complex64>) -> Result<Self> {
        if op.ncols() != self.dim() || op.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.ncols(),
            });
        }
        Ok(Self::from_parts(op * &self.amplitudes, self.space.clone()))
    }

    /// Reshapes the amplitudes into a `rest × dim(label)` matrix whose rows are
    /// indexed by the remaining factors (row-major) and columns by `label`.
    pub fn factor_matrix(&self, labels: &[&str]) -> Result<DMatrix<Complex64>> {
        let (kept, sel) = self.space.split_offsets(labels)?;
        Ok(DMatrix::from_fn(kept.len(), sel.len(), |r, c| {
            self.amplitudes[kept[r] + sel[c]]
        }))
    }

    /// Partial inner product `⟨b|Ψ⟩` where `b` lives on factor `label`.
    /// Linear in `Ψ`, antilinear in `b`; the result lives on the remaining factors.
    pub fn partial_inner(&self, label: &str, b: &DVector<Complex64>) -> Result<Self> {
        let dim = self.space.dim_of(label)?;
        if b.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: b.len(),
            });
        }
        let rest = self.space.without(&[label])?;
        let m = self.factor_matrix(&[label])?;
        let conj_b = b.map(|z| z.conj());
        Ok(Self::from_parts(m * conj_b, rest))
    }

    /// `⟨u_k|Ψ⟩` for every column `u_k` of `basis` (a matrix on factor `label`),
    /// returned as the columns of a `rest × k` matrix, together with the
    /// factorization of the remaining factors.
    pub fn partial_inner_all(
        &self,
        label: &str,
        basis: &DMatrix<Complex64>,
    ) -> Result<(DMatrix<Complex64>, SpaceFactorization)> {
        let dim = self.space.dim_of(label)?;
        if basis.nrows() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: basis.nrows(),
            });
        }
        let rest = self.space.without(&[label])?;
        let m = self.factor_matrix(&[label])?;
        Ok((m * basis.map(|z| z.conj()), rest))
    }

    /// `tr_{labels} |Ψ⟩⟨Ψ|` computed directly from the amplitudes.
    pub fn reduced_density(&self, traced: &[&str]) -> Result<DensityMatrix> {
        if traced.is_empty() {
            return Err(Error::NoLabels);
        }
        let rest = self.space.without(traced)?;
        let m = self.factor_matrix(traced)?;
        let rho = &m * m.adjoint();
        Ok(DensityMatrix::from_parts(rho, rest))
    }

    /// `|ψ⟩⟨ψ|/‖ψ‖²`.
    pub fn projector(&self) -> Result<DensityMatrix> {
        let n2 = self.norm_squared();
        if n2 == 0.0 {
            return Err(Error::EmptyInput("zero vector has no projector"));
        }
        let rho = (&self.amplitudes * self.amplitudes.adjoint()).unscale(n2);
        Ok(DensityMatrix::from_parts(rho, self.space.clone()))
    }

    pub fn with_space(mut self, space: SpaceFactorization) -> Result<Self> {
        if space.total_dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: space.total_dim(),
            });
        }
        self.space = space;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::RandomStream;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_state(stream: &mut RandomStream, space: SpaceFactorization) -> StateVector {
        let n = space.total_dim();
        let v = DVector::from_fn(n, |_, _| stream.complex_gaussian_unit());
        StateVector::new(v, space).unwrap()
    }

    #[test]
    fn tensor_of_basis_vectors_lands_on_row_major_index() {
        let a = StateVector::basis(0, SpaceFactorization::single("a", 2).unwrap()).unwrap();
        let b = StateVector::basis(1, SpaceFactorization::single("b", 2).unwrap()).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.dim(), 4);
        assert_eq!(ab.amplitudes()[1], c(1.0, 0.0));
        assert_eq!(ab.norm_squared(), 1.0);
        assert_eq!(ab.space().dims(), vec![2, 2]);
    }

    #[test]
    fn tensor_matches_index_loop() {
        let mut s = RandomStream::new(11, 0);
        let a = random_state(&mut s, SpaceFactorization::single("a", 2).unwrap());
        let b = random_state(&mut s, SpaceFactorization::single("b", 3).unwrap());
        let ab = a.tensor(&b).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let want = a.amplitudes()[i] * b.amplitudes()[j];
                assert!((ab.amplitudes()[3 * i + j] - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn tensor_with_trivial_factor_keeps_amplitudes() {
        let mut s = RandomStream::new(3, 0);
        let a = random_state(&mut s, SpaceFactorization::single("a", 3).unwrap());
        let one = StateVector::basis(0, SpaceFactorization::single("t", 1).unwrap()).unwrap();
        let a1 = a.tensor(&one).unwrap();
        assert_eq!(a1.amplitudes(), a.amplitudes());
        assert_eq!(a1.space().dims(), vec![3, 1]);
    }

    #[test]
    fn partial_inner_on_product_state() {
        let mut s = RandomStream::new(5, 0);
        let psi = random_state(&mut s, SpaceFactorization::single("S", 2).unwrap())
            .normalized()
            .unwrap();
        let chi = random_state(&mut s, SpaceFactorization::single("B", 3).unwrap())
            .normalized()
            .unwrap();
        let big = psi.tensor(&chi).unwrap();
        let back = big.partial_inner("B", chi.amplitudes()).unwrap();
        assert!((back.amplitudes() - psi.amplitudes()).norm() < 1e-14);
        assert!((back.norm() - 1.0).abs() < 1e-14);

        // a vector orthogonal to chi
        let w = DVector::from_fn(3, |_, _| s.complex_gaussian_unit());
        let overlap = chi.amplitudes().dotc(&w);
        let orth = &w - chi.amplitudes() * overlap;
        let zero = big.partial_inner("B", &orth).unwrap();
        assert!(zero.norm() < 1e-14);
    }

    #[test]
    fn partial_inner_middle_factor_matches_loop() {
        let mut s = RandomStream::new(8, 0);
        let space = SpaceFactorization::new([("a", 2), ("b", 2), ("c", 3)]).unwrap();
        let psi = random_state(&mut s, space);
        let b = DVector::from_fn(2, |_, _| s.complex_gaussian_unit());
        let out = psi.partial_inner("b", &b).unwrap();
        assert_eq!(out.space().dims(), vec![2, 3]);
        for i in 0..2 {
            for k in 0..3 {
                let mut want = c(0.0, 0.0);
                for j in 0..2 {
                    want += b[j].conj() * psi.amplitudes()[i * 6 + j * 3 + k];
                }
                assert!((out.amplitudes()[i * 3 + k] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn partial_inner_rejects_bad_dimension() {
        let psi = StateVector::basis(0, SpaceFactorization::new([("a", 2), ("b", 3)]).unwrap())
            .unwrap();
        let b = DVector::from_element(2, c(1.0, 0.0));
        assert!(matches!(
            psi.partial_inner("b", &b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            psi.partial_inner("zz", &b),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn reduced_density_matches_index_sum() {
        let mut s = RandomStream::new(21, 0);
        let space = SpaceFactorization::new([("a", 2), ("b", 3)]).unwrap();
        let psi = random_state(&mut s, space).normalized().unwrap();
        let rho = psi.reduced_density(&["b"]).unwrap();
        for i in 0..2 {
            for ip in 0..2 {
                let mut want = c(0.0, 0.0);
                for j in 0..3 {
                    want += psi.amplitudes()[i * 3 + j] * psi.amplitudes()[ip * 3 + j].conj();
                }
                assert!((rho.entries()[(i, ip)] - want).norm() < 1e-14);
            }
        }
    }
}
