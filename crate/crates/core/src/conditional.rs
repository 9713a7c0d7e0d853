//! Conditional wave functions `⟨Y|Ψ⟩/‖⟨Y|Ψ⟩‖` and conditional density
//! matrices, where `Y` is the outcome of a basis measurement on one factor.
//!
//! Factors are addressed by label; the basis carries the label of the factor
//! it lives on.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ensembles::RandomStream;
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, OrthonormalBasis, SpaceFactorization, StateVector};

/// Outcomes with probability below this are treated as impossible.
pub const ZERO_WEIGHT: f64 = 1e-14;

const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalOutcome {
    pub y_index: usize,
    /// `‖⟨y|Ψ⟩‖²`.
    pub weight: f64,
    /// `⟨y|Ψ⟩/‖⟨y|Ψ⟩‖` on the remaining factors.
    pub conditional_state: StateVector,
}

fn require_normalized(psi: &StateVector) -> Result<()> {
    if !psi.is_normalized(NORM_TOL) {
        return Err(Error::param(
            "psi",
            format!("must be normalized, has norm² {}", psi.norm_squared()),
        ));
    }
    Ok(())
}

/// Columns `⟨u_y|Ψ⟩` and their squared norms.
fn conditionals(
    psi: &StateVector,
    basis: &OrthonormalBasis,
) -> Result<(DMatrix<Complex64>, SpaceFactorization, Vec<f64>)> {
    let (cols, rest) = psi.partial_inner_all(basis.factor_label(), basis.matrix())?;
    let weights = cols.column_iter().map(|c| c.norm_squared()).collect();
    Ok((cols, rest, weights))
}

fn outcome(cols: &DMatrix<Complex64>, rest: &SpaceFactorization, y: usize, w: f64) -> ConditionalOutcome {
    let state = cols.column(y).unscale(w.sqrt());
    ConditionalOutcome {
        y_index: y,
        weight: w,
        conditional_state: StateVector::from_parts(state, rest.clone()),
    }
}

/// `ℙ(Y = y) = ‖⟨u_y|Ψ⟩‖²` for each basis vector `u_y`.
pub fn outcome_distribution(psi: &StateVector, basis: &OrthonormalBasis) -> Result<Vec<f64>> {
    require_normalized(psi)?;
    Ok(conditionals(psi, basis)?.2)
}

/// Draws `Y` from [`outcome_distribution`] and returns the conditional wave
/// function. Outcomes of weight below [`ZERO_WEIGHT`] are never drawn.
pub fn sample_conditional_wf(
    stream: &mut RandomStream,
    psi: &StateVector,
    basis: &OrthonormalBasis,
) -> Result<ConditionalOutcome> {
    require_normalized(psi)?;
    let (cols, rest, mut weights) = conditionals(psi, basis)?;
    let raw = weights.clone();
    weights.iter_mut().filter(|w| **w < ZERO_WEIGHT).for_each(|w| *w = 0.0);
    let y = stream.weighted_index(&weights);
    Ok(outcome(&cols, &rest, y, raw[y]))
}

/// Every outcome of nonzero weight, in basis order.
pub fn all_conditional_outcomes(
    psi: &StateVector,
    basis: &OrthonormalBasis,
) -> Result<Vec<ConditionalOutcome>> {
    require_normalized(psi)?;
    let (cols, rest, weights) = conditionals(psi, basis)?;
    Ok(weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w >= ZERO_WEIGHT)
        .map(|(y, &w)| outcome(&cols, &rest, y, w))
        .collect())
}

/// `⟨u_y|Ψ⟩` with its squared norm, failing on a (numerically) zero norm.
fn conditioned(
    psi: &StateVector,
    y_basis: &OrthonormalBasis,
    y_index: usize,
) -> Result<(StateVector, f64)> {
    if y_index >= y_basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: y_basis.dim(),
            found: y_index + 1,
        });
    }
    let phi = psi.partial_inner(y_basis.factor_label(), &y_basis.vector(y_index))?;
    let n2 = phi.norm_squared();
    if n2 < ZERO_WEIGHT {
        return Err(Error::ZeroConditionalNorm(y_index));
    }
    Ok((phi, n2))
}

/// `tr_s ⟨Y|Ψ⟩⟨Ψ|Y⟩ / ‖⟨Y|Ψ⟩‖²`, a density matrix on the factors other than
/// the conditioning factor and `s_label`.
pub fn conditional_density_matrix(
    psi: &StateVector,
    y_basis: &OrthonormalBasis,
    y_index: usize,
    s_label: &str,
) -> Result<DensityMatrix> {
    let (phi, n2) = conditioned(psi, y_basis, y_index)?;
    let rest = phi.space().without(&[s_label])?;
    let m = phi.factor_matrix(&[s_label])?;
    DensityMatrix::new((&m * m.adjoint()).unscale(n2), rest)
}

/// A conditional density matrix together with its outcome.
#[derive(Clone, Debug)]
pub struct ConditionalDensity {
    pub y_index: usize,
    pub weight: f64,
    pub rho: DensityMatrix,
}

/// [`conditional_density_matrix`] for every outcome of nonzero weight, from a
/// single pass over the amplitudes. `Ψ` need not be normalized.
pub fn all_conditional_density_matrices(
    psi: &StateVector,
    y_basis: &OrthonormalBasis,
    s_label: &str,
) -> Result<Vec<ConditionalDensity>> {
    let (cols, rest) = psi.partial_inner_all(y_basis.factor_label(), y_basis.matrix())?;
    let kept = rest.without(&[s_label])?;
    let (row_off, s_off) = rest.split_offsets(&[s_label])?;
    let mut out = Vec::new();
    for (y, c) in cols.column_iter().enumerate() {
        let w = c.norm_squared();
        if w < ZERO_WEIGHT {
            continue;
        }
        let m = DMatrix::from_fn(row_off.len(), s_off.len(), |r, k| c[row_off[r] + s_off[k]]);
        out.push(ConditionalDensity {
            y_index: y,
            weight: w,
            rho: DensityMatrix::new((&m * m.adjoint()).unscale(w), kept.clone())?,
        });
    }
    Ok(out)
}

/// The same matrix built as `Σ_s ℙ(s|Y) |ψ_S(Y,s)⟩⟨ψ_S(Y,s)|` over an
/// orthonormal basis of the `s` factor.
pub fn conditional_dm_from_s_average(
    psi: &StateVector,
    y_basis: &OrthonormalBasis,
    y_index: usize,
    s_basis: &OrthonormalBasis,
) -> Result<DensityMatrix> {
    let (phi, n2) = conditioned(psi, y_basis, y_index)?;
    let (cols, rest) = phi.partial_inner_all(s_basis.factor_label(), s_basis.matrix())?;
    let d = rest.total_dim();
    let mut acc = DMatrix::<Complex64>::zeros(d, d);
    for c in cols.column_iter() {
        let w = c.norm_squared();
        if w == 0.0 {
            continue;
        }
        let psi_s = c.unscale(w.sqrt());
        acc += (&psi_s * psi_s.adjoint()) * Complex64::new(w / n2, 0.0);
    }
    DensityMatrix::new(acc, rest)
}
