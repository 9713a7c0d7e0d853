//! Hamiltonians given by spectrum and eigenbasis, canonical and
//! microcanonical density matrices, temperature matching and the
//! variance-ratio predictor `Z(2β)/Z(β)²`.
//!
//! Energies are dimensionless. Inverse temperatures may be negative (a shell
//! above the spectral midpoint matches a negative β); all sums are evaluated
//! in log space with the dominant level shifted to zero.

mod hamiltonian;
mod shell;
mod spectrum;

pub use hamiltonian::{build_composite, Eigenbasis, HamiltonianSpec};
pub use shell::{
    energy_shell, microcanonical, reduced_shell_density, sample_shell_state, EnergyShell,
    SHELL_TOL,
};
pub use spectrum::{semicircle_quantiles, synth_bath_spectrum, SpectrumModel};

use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;

/// Energy the exponent is measured from: the level with the largest weight.
fn reference_energy(energies: &[f64], beta: f64) -> f64 {
    if beta >= 0.0 {
        energies[0]
    } else {
        energies[energies.len() - 1]
    }
}

/// `ln Σ_i exp(−β E_i)` for a sorted spectrum.
fn log_sum(energies: &[f64], beta: f64) -> f64 {
    let e0 = reference_energy(energies, beta);
    let s: f64 = energies.iter().map(|e| (-beta * (e - e0)).exp()).sum();
    s.ln() - beta * e0
}

/// Boltzmann weights `exp(−β E_i)/Z`, in eigenvalue order.
pub fn canonical_weights(h: &HamiltonianSpec, beta: f64) -> Vec<f64> {
    let e = h.eigenvalues();
    let e0 = reference_energy(e, beta);
    let mut w: Vec<f64> = e.iter().map(|x| (-beta * (x - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    w
}

/// `ρ_β = exp(−βH)/Z` as a dense matrix on `H`'s space.
pub fn canonical_density_matrix(h: &HamiltonianSpec, beta: f64) -> Result<DensityMatrix> {
    if !beta.is_finite() {
        return Err(Error::param("beta", "must be finite"));
    }
    let w = canonical_weights(h, beta);
    DensityMatrix::from_spectrum(&w, &h.eigenbasis().to_dense(), h.space().clone())
}

/// `ln Z(β)`.
pub fn log_partition_function(h: &HamiltonianSpec, beta: f64) -> f64 {
    log_sum(h.eigenvalues(), beta)
}

/// `Z(β) = tr exp(−βH)`; may overflow to infinity where `ln Z` does not.
pub fn partition_function(h: &HamiltonianSpec, beta: f64) -> f64 {
    log_partition_function(h, beta).exp()
}

/// `tr(ρ_β H)`.
pub fn mean_energy(h: &HamiltonianSpec, beta: f64) -> f64 {
    let e = h.eigenvalues();
    let e0 = reference_energy(e, beta);
    let w = canonical_weights(h, beta);
    e0 + w.iter().zip(e).map(|(p, x)| p * (x - e0)).sum::<f64>()
}

/// The β with `tr(ρ_β H) = target`, by bisection on the strictly decreasing
/// map `β ↦ tr(ρ_β H)`.
pub fn match_beta(h: &HamiltonianSpec, target: f64) -> Result<f64> {
    let (lo_e, hi_e) = (h.min_energy(), h.max_energy());
    let spread = hi_e - lo_e;
    if !(spread > 0.0) {
        return Err(Error::SingleLevel);
    }
    if !(target > lo_e && target < hi_e) {
        return Err(Error::TargetOutOfRange {
            target,
            min: lo_e,
            max: hi_e,
        });
    }
    let e = h.eigenvalues();
    // signed residual, measured from the dominant level so that targets very
    // close to either end of the spectrum keep full relative precision
    let residual = |beta: f64| -> f64 {
        let e0 = reference_energy(e, beta);
        let w = canonical_weights(h, beta);
        w.iter().zip(e).map(|(p, x)| p * (x - e0)).sum::<f64>() - (target - e0)
    };
    let mut lo = -1.0 / spread;
    let mut hi = 1.0 / spread;
    while residual(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while residual(lo) < 0.0 {
        hi = lo;
        lo *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    let r = residual(beta).abs();
    if r > 1e-9 * spread {
        return Err(Error::param(
            "target_energy",
            format!("bisection stalled with residual {r:e}"),
        ));
    }
    Ok(beta)
}

/// `Z(2β)/Z(β)²`, the purity of `ρ_β`.
pub fn variance_ratio_prediction(h: &HamiltonianSpec, beta: f64) -> f64 {
    (log_sum(h.eigenvalues(), 2.0 * beta) - 2.0 * log_sum(h.eigenvalues(), beta)).exp()
}
