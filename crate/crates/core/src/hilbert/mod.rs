//! Finite-dimensional complex Hilbert space algebra: factored spaces, state
//! vectors, density matrices, partial traces and distances.
//!
//! Everything is dense. Flat indices are row-major over the ordered factors
//! (see [`SpaceFactorization`]).

mod basis;
mod density;
mod space;
mod state;

pub use basis::{orthonormality_defect, OrthonormalBasis, ORTHONORMAL_TOL};
pub use density::{
    partial_trace, purity, trace_distance, DensityMatrix, Spectral, EIGEN_FLOOR, HERMITIAN_TOL,
    SYMMETRIZE_TOL, TRACE_TOL,
};
pub use space::SpaceFactorization;
pub use state::StateVector;

pub(crate) use density::{max_abs_diff, spectral};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::Result;

/// Either kind of object that supports `⊗`.
pub trait TensorProduct: Sized {
    fn tensor_product(&self, other: &Self) -> Result<Self>;
}

impl TensorProduct for StateVector {
    fn tensor_product(&self, other: &Self) -> Result<Self> {
        self.tensor(other)
    }
}

impl TensorProduct for DensityMatrix {
    fn tensor_product(&self, other: &Self) -> Result<Self> {
        self.tensor(other)
    }
}

pub fn tensor_product<T: TensorProduct>(a: &T, b: &T) -> Result<T> {
    a.tensor_product(b)
}

/// `⟨b|Ψ⟩` with `b` a vector on factor `label`.
pub fn partial_inner_product(
    b: &DVector<Complex64>,
    label: &str,
    psi: &StateVector,
) -> Result<StateVector> {
    psi.partial_inner(label, b)
}
