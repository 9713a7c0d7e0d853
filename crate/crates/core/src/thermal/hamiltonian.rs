use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{spectral, OrthonormalBasis, SpaceFactorization};

/// Eigenbasis of a Hamiltonian. Composites keep their tensor structure so that
/// nothing of size `total_dim²` is ever materialized.
#[derive(Clone, Debug, PartialEq)]
pub enum Eigenbasis {
    /// Eigenvector `k` is the computational basis vector `k`.
    Computational(usize),
    /// Columns are eigenvectors, in eigenvalue order.
    Dense(OrthonormalBasis),
    /// Tensor product of single-factor bases. Eigenvector `k` is the product
    /// of factor eigenvectors whose row-major flat multi-index is `order[k]`.
    Product {
        factors: Vec<Eigenbasis>,
        order: Vec<usize>,
    },
}

impl Eigenbasis {
    pub fn dim(&self) -> usize {
        match self {
            Eigenbasis::Computational(n) => *n,
            Eigenbasis::Dense(b) => b.dim(),
            Eigenbasis::Product { order, .. } => order.len(),
        }
    }

    fn factor_dims(&self) -> Vec<usize> {
        match self {
            Eigenbasis::Product { factors, .. } => factors.iter().map(Eigenbasis::dim).collect(),
            other => vec![other.dim()],
        }
    }

    /// Flat row-major multi-index of eigenvector `k` over the factor bases.
    fn flat_index(&self, k: usize) -> usize {
        match self {
            Eigenbasis::Product { order, .. } => order[k],
            _ => k,
        }
    }

    fn leaf_factors(&self) -> Vec<Eigenbasis> {
        match self {
            Eigenbasis::Product { factors, .. } => factors.clone(),
            other => vec![other.clone()],
        }
    }

    fn leaf_matrix(&self) -> Option<&DMatrix<Complex64>> {
        match self {
            Eigenbasis::Dense(b) => Some(b.matrix()),
            _ => None,
        }
    }

    /// Maps eigen-coordinates `c` to computational amplitudes `Σ_k c_k |e_k⟩`.
    pub fn embed(&self, coords: &DVector<Complex64>) -> DVector<Complex64> {
        match self {
            Eigenbasis::Computational(_) => coords.clone(),
            Eigenbasis::Dense(b) => b.matrix() * coords,
            Eigenbasis::Product { factors, order } => {
                let mut t = DVector::zeros(order.len());
                for (k, &flat) in order.iter().enumerate() {
                    t[flat] = coords[k];
                }
                let dims: Vec<usize> = factors.iter().map(Eigenbasis::dim).collect();
                for (m, f) in factors.iter().enumerate() {
                    if let Some(u) = f.leaf_matrix() {
                        apply_mode(&mut t, &dims, m, u);
                    }
                }
                t
            }
        }
    }

    /// Dense unitary; only sensible for small spaces.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        match self {
            Eigenbasis::Computational(_) => DMatrix::identity(n, n),
            Eigenbasis::Dense(b) => b.matrix().clone(),
            Eigenbasis::Product { .. } => {
                let mut out = DMatrix::zeros(n, n);
                for k in 0..n {
                    let mut e = DVector::zeros(n);
                    e[k] = Complex64::new(1.0, 0.0);
                    out.set_column(k, &self.embed(&e));
                }
                out
            }
        }
    }
}

/// Applies `u` to tensor mode `m` of the row-major array `t`.
fn apply_mode(t: &mut DVector<Complex64>, dims: &[usize], m: usize, u: &DMatrix<Complex64>) {
    let d = dims[m];
    let right: usize = dims[m + 1..].iter().product();
    let left: usize = dims[..m].iter().product();
    let mut buf = DVector::zeros(d);
    for l in 0..left {
        for r in 0..right {
            let base = l * d * right + r;
            for i in 0..d {
                buf[i] = t[base + i * right];
            }
            let out = u * &buf;
            for i in 0..d {
                t[base + i * right] = out[i];
            }
        }
    }
}

/// Hermitian operator given by its sorted spectrum and eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianSpec {
    eigenvalues: Vec<f64>,
    eigenbasis: Eigenbasis,
    space: SpaceFactorization,
    label: String,
}

impl HamiltonianSpec {
    /// `diag(energies)` in the computational basis (or in `basis`, whose
    /// column `k` is the eigenvector for `energies[k]`). Sorts internally.
    pub fn from_spectrum(
        label: &str,
        energies: &[f64],
        basis: Option<OrthonormalBasis>,
    ) -> Result<Self> {
        let n = energies.len();
        if n == 0 {
            return Err(Error::param("energies", "spectrum is empty"));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::param("energies", "non-finite eigenvalue"));
        }
        if let Some(b) = &basis {
            if b.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: b.dim(),
                });
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by(|&i, &j| energies[i].total_cmp(&energies[j]).then(i.cmp(&j)));
        let sorted: Vec<f64> = perm.iter().map(|&i| energies[i]).collect();
        let identity_perm = perm.iter().enumerate().all(|(k, &p)| k == p);
        let eigenbasis = match basis {
            None if identity_perm => Eigenbasis::Computational(n),
            None => Eigenbasis::Dense(OrthonormalBasis::computational(n, label).permuted(&perm)?),
            Some(b) => Eigenbasis::Dense(b.relabeled(label).permuted(&perm)?),
        };
        Ok(Self {
            eigenvalues: sorted,
            eigenbasis,
            space: SpaceFactorization::single(label, n)?,
            label: label.to_string(),
        })
    }

    /// Diagonalizes a Hermitian matrix.
    pub fn from_matrix(label: &str, h: &DMatrix<Complex64>) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                found: h.ncols(),
            });
        }
        let spec = spectral(h);
        let basis = OrthonormalBasis::new(spec.eigenvectors, label)?;
        Self::from_spectrum(label, &spec.eigenvalues, Some(basis))
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenbasis(&self) -> &Eigenbasis {
        &self.eigenbasis
    }

    pub fn space(&self) -> &SpaceFactorization {
        &self.space
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn min_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_energy(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `Σ_k E_k |e_k⟩⟨e_k|` as a dense matrix.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let v = self.eigenbasis.to_dense();
        let n = self.dim();
        let scaled = DMatrix::from_fn(n, n, |r, c| v[(r, c)] * self.eigenvalues[c]);
        scaled * v.adjoint()
    }

    /// `H + V` rediagonalized densely. A robustness hook for interaction
    /// terms; the default pipelines never call it.
    pub fn perturbed(&self, v: &DMatrix<Complex64>) -> Result<Self> {
        let n = self.dim();
        if v.nrows() != n || v.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: v.nrows(),
            });
        }
        let mut h = Self::from_matrix(&self.label, &(self.to_dense() + v))?;
        h.space = self.space.clone();
        Ok(h)
    }

    /// Per-factor eigen-indices of composite eigenvector `k`.
    pub fn factor_indices(&self, k: usize) -> Vec<usize> {
        let dims = self.eigenbasis.factor_dims();
        let mut flat = self.eigenbasis.flat_index(k);
        let mut out = vec![0; dims.len()];
        for m in (0..dims.len()).rev() {
            out[m] = flat % dims[m];
            flat /= dims[m];
        }
        out
    }

    /// Single-factor eigenbasis matrices (identity for computational ones).
    pub(crate) fn factor_bases(&self) -> Vec<DMatrix<Complex64>> {
        self.eigenbasis
            .leaf_factors()
            .iter()
            .map(Eigenbasis::to_dense)
            .collect()
    }
}

/// `H_S ⊗ I + I ⊗ H_B` (no interaction term). Eigenvalues are all pairwise
/// sums, sorted; the eigenbasis is the product basis.
pub fn build_composite(a: &HamiltonianSpec, b: &HamiltonianSpec) -> Result<HamiltonianSpec> {
    let space = a.space.concat(&b.space)?;
    let (na, nb) = (a.dim(), b.dim());
    let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(na * nb);
    for i in 0..na {
        let fi = a.eigenbasis.flat_index(i);
        for j in 0..nb {
            let fj = b.eigenbasis.flat_index(j);
            pairs.push((a.eigenvalues[i] + b.eigenvalues[j], fi * nb + fj));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut factors = a.eigenbasis.leaf_factors();
    factors.extend(b.eigenbasis.leaf_factors());
    Ok(HamiltonianSpec {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        eigenbasis: Eigenbasis::Product {
            factors,
            order: pairs.iter().map(|p| p.1).collect(),
        },
        space,
        label: format!("{}+{}", a.label, b.label),
    })
}
