//! Numerical laboratory for GAP (Scrooge) measures, conditional wave
//! functions and conditional density matrices on finite-dimensional spaces.

pub mod conditional;
pub mod ensembles;
pub mod experiments;
pub mod error;
pub mod hilbert;
pub mod runner;
pub mod stats;
pub mod thermal;

pub use error::{Error, Result};
pub use hilbert::{DensityMatrix, OrthonormalBasis, SpaceFactorization, StateVector};
pub use ensembles::RandomStream;
