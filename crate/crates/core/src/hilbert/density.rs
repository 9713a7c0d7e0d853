use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::SpaceFactorization;
use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const EIGEN_FLOOR: f64 = -1e-10;
pub const TRACE_TOL: f64 = 1e-10;
/// Largest asymmetry tolerated before an accumulated matrix is symmetrized.
pub const SYMMETRIZE_TOL: f64 = 1e-8;

/// Hermitian, positive semidefinite, unit-trace matrix over a factored space.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
    space: SpaceFactorization,
}

/// Eigen-decomposition of a density matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validates every invariant: Hermitian, PSD, unit trace.
    pub fn new(entries: DMatrix<Complex64>, space: SpaceFactorization) -> Result<Self> {
        let n = space.total_dim();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.nrows(),
            });
        }
        let asym = max_asymmetry(&entries);
        if asym > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (max |ρ - ρ†| = {asym:.3e})"
            )));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} ≠ 1")));
        }
        let min = hermitian_eigenvalues(&entries)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < EIGEN_FLOOR {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self { entries, space })
    }

    /// Real diagonal density matrix on a single factor.
    pub fn diagonal(weights: &[f64], label: &str) -> Result<Self> {
        let space = SpaceFactorization::single(label, weights.len())?;
        let m = DMatrix::from_diagonal(&DVector::from_iterator(
            weights.len(),
            weights.iter().map(|&w| Complex64::new(w, 0.0)),
        ));
        Self::new(m, space)
    }

    /// `I/n` on the given space.
    pub fn maximally_mixed(space: SpaceFactorization) -> Self {
        let n = space.total_dim();
        let m = DMatrix::identity(n, n).unscale(n as f64);
        Self { entries: m, space }
    }

    /// `V diag(p) V†`; `p` must be a probability vector and `V` unitary.
    pub fn from_spectrum(
        weights: &[f64],
        vectors: &DMatrix<Complex64>,
        space: SpaceFactorization,
    ) -> Result<Self> {
        let n = weights.len();
        if vectors.nrows() != n || vectors.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: vectors.ncols(),
            });
        }
        let scaled = DMatrix::from_fn(n, n, |r, c| vectors[(r, c)] * weights[c]);
        let rho = hermitize(&scaled * vectors.adjoint());
        Self::new(rho, space)
    }

    /// Symmetrizes an accumulated estimate `(ρ+ρ†)/2` and rescales to unit
    /// trace. Fails if the raw asymmetry exceeds [`SYMMETRIZE_TOL`].
    pub fn from_accumulated(entries: DMatrix<Complex64>, space: SpaceFactorization) -> Result<Self> {
        let asym = max_asymmetry(&entries);
        if asym > SYMMETRIZE_TOL {
            return Err(Error::Asymmetric(asym));
        }
        let mut m = hermitize(entries);
        let tr = m.trace().re;
        if !(tr > 0.0) {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        m.unscale_mut(tr);
        Ok(Self { entries: m, space })
    }

    pub(crate) fn from_parts(entries: DMatrix<Complex64>, space: SpaceFactorization) -> Self {
        Self {
            entries: hermitize(entries),
            space,
        }
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn space(&self) -> &SpaceFactorization {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = hermitian_eigenvalues(&self.entries);
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn spectral(&self) -> Spectral {
        spectral(&self.entries)
    }

    /// `⟨φ|ρ|φ⟩` (real for Hermitian ρ).
    pub fn expectation(&self, phi: &DVector<Complex64>) -> Result<f64> {
        if phi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: phi.len(),
            });
        }
        Ok(phi.dotc(&(&self.entries * phi)).re)
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ_ij |ρ_ij|² for Hermitian ρ
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let space = self.space.concat(&other.space)?;
        Ok(Self {
            entries: self.entries.kronecker(&other.entries),
            space,
        })
    }

    /// `U ρ U†` with the factorization unchanged.
    pub fn conjugate_by(&self, u: &DMatrix<Complex64>) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: u.nrows(),
            });
        }
        Ok(Self::from_parts(
            u * &self.entries * u.adjoint(),
            self.space.clone(),
        ))
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

    /// Traces out the named factors.
    pub fn partial_trace(&self, traced: &[&str]) -> Result<Self> {
        if traced.is_empty() {
            return Err(Error::NoLabels);
        }
        let rest = self.space.without(traced)?;
        let (kept, sel) = self.space.split_offsets(traced)?;
        let k = kept.len();
        let out = DMatrix::from_fn(k, k, |r, c| {
            sel.iter()
                .map(|&t| self.entries[(kept[r] + t, kept[c] + t)])
                .sum()
        });
        Ok(Self::from_parts(out, rest))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_abs_diff(&self.entries, &other.entries)
    }
}

/// `½ Σ|λ_i|` over the eigenvalues of `ρ1 − ρ2`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let diff = hermitize(&a.entries - &b.entries);
    let sum: f64 = hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum();
    Ok(0.5 * sum)
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

pub fn partial_trace(rho: &DensityMatrix, traced: &[&str]) -> Result<DensityMatrix> {
    rho.partial_trace(traced)
}

pub(crate) fn max_asymmetry(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub(crate) fn hermitize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let adj = m.adjoint();
    (m + adj).scale(0.5)
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    match m.nrows() {
        0 => vec![],
        1 => vec![m[(0, 0)].re],
        2 => {
            // closed form avoids the iterative solver on the hot 2x2 path
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let b = m[(0, 1)];
            let mean = 0.5 * (a + d);
            let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            vec![mean - r, mean + r]
        }
        _ => m.clone().symmetric_eigenvalues().iter().copied().collect(),
    }
}

pub(crate) fn spectral(m: &DMatrix<Complex64>) -> Spectral {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Spectral {
        eigenvalues,
        eigenvectors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::StateVector;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn rejects_invalid_matrices() {
        let space = SpaceFactorization::single("a", 2).unwrap();
        let not_herm = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.1), c(0.0), c(0.5)]);
        assert!(DensityMatrix::new(not_herm, space.clone()).is_err());
        let bad_trace = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.0), c(0.0), c(0.6)]);
        assert!(DensityMatrix::new(bad_trace, space.clone()).is_err());
        let negative = DMatrix::from_row_slice(2, 2, &[c(1.2), c(0.0), c(0.0), c(-0.2)]);
        assert!(DensityMatrix::new(negative, space).is_err());
    }

    #[test]
    fn trace_distance_examples() {
        let a = DensityMatrix::diagonal(&[0.7, 0.3], "q").unwrap();
        let b = DensityMatrix::diagonal(&[0.5, 0.5], "q").unwrap();
        assert!((trace_distance(&a, &b).unwrap() - 0.2).abs() < 1e-15);
        assert!(trace_distance(&a, &a).unwrap().abs() < 1e-15);
        let zero = DensityMatrix::diagonal(&[1.0, 0.0], "q").unwrap();
        let one = DensityMatrix::diagonal(&[0.0, 1.0], "q").unwrap();
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trace_distance_rejects_mismatch() {
        let a = DensityMatrix::diagonal(&[0.5, 0.5], "q").unwrap();
        let b = DensityMatrix::diagonal(&[0.2, 0.3, 0.5], "q").unwrap();
        assert!(matches!(
            trace_distance(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn purity_examples() {
        let pure = DensityMatrix::diagonal(&[0.0, 1.0, 0.0], "q").unwrap();
        assert!((pure.purity() - 1.0).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(SpaceFactorization::single("q", 5).unwrap());
        assert!((mixed.purity() - 0.2).abs() < 1e-15);
        let d = DensityMatrix::diagonal(&[0.7, 0.3], "q").unwrap();
        assert!((d.purity() - 0.58).abs() < 1e-15);
    }

    #[test]
    fn partial_trace_of_product_and_bell() {
        let space2 = |l: &str| SpaceFactorization::single(l, 2).unwrap();
        let a = StateVector::from_vec(vec![c(0.6), Complex64::new(0.0, 0.8)], space2("a")).unwrap();
        let b = StateVector::from_vec(vec![c(0.8), c(-0.6)], space2("b")).unwrap();
        let rho_ab = a.tensor(&b).unwrap().projector().unwrap();
        let rho_a = rho_ab.partial_trace(&["b"]).unwrap();
        assert!(rho_a.max_abs_diff(&a.projector().unwrap()) < 1e-15);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = StateVector::from_vec(
            vec![c(s), c(0.0), c(0.0), c(s)],
            SpaceFactorization::new([("a", 2), ("b", 2)]).unwrap(),
        )
        .unwrap();
        let red = bell.projector().unwrap().partial_trace(&["b"]).unwrap();
        let half = DensityMatrix::maximally_mixed(space2("a"));
        assert!(red.max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn partial_trace_errors() {
        let rho = DensityMatrix::maximally_mixed(
            SpaceFactorization::new([("a", 2), ("b", 2)]).unwrap(),
        );
        assert!(matches!(
            rho.partial_trace(&["a", "b"]),
            Err(Error::TraceAllFactors)
        ));
        assert!(matches!(
            rho.partial_trace(&["c"]),
            Err(Error::UnknownLabel(_))
        ));
        assert!(matches!(rho.partial_trace(&[]), Err(Error::NoLabels)));
    }

    #[test]
    fn accumulated_estimate_is_symmetrized() {
        let space = SpaceFactorization::single("a", 2).unwrap();
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[c(1.0), Complex64::new(0.1, 1e-10), Complex64::new(0.1, 0.0), c(1.0)],
        );
        let rho = DensityMatrix::from_accumulated(m.clone(), space.clone()).unwrap();
        assert!(max_asymmetry(rho.entries()) == 0.0);
        assert!((rho.trace() - 1.0).abs() < 1e-15);
        let mut bad = m;
        bad[(0, 1)] += Complex64::new(1e-6, 0.0);
        assert!(matches!(
            DensityMatrix::from_accumulated(bad, space),
            Err(Error::Asymmetric(_))
        ));
    }

    #[test]
    fn two_by_two_eigen_shortcut_matches_solver() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[c(0.3), Complex64::new(0.1, -0.2), Complex64::new(0.1, 0.2), c(0.7)],
        );
        let mut fast = hermitian_eigenvalues(&m);
        let mut slow: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        fast.sort_by(f64::total_cmp);
        slow.sort_by(f64::total_cmp);
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
