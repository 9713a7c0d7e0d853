use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Eigenbasis, HamiltonianSpec};
use crate::ensembles::RandomStream;
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, StateVector};

/// Slack applied to both shell edges when comparing eigenvalues.
pub const SHELL_TOL: f64 = 1e-12;

/// Eigenvalues of a Hamiltonian lying in `[E, E+δ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyShell {
    pub energy: f64,
    pub delta: f64,
    /// Indices into the sorted spectrum, ascending.
    pub member_indices: Vec<usize>,
}

impl EnergyShell {
    pub fn shell_dim(&self) -> usize {
        self.member_indices.len()
    }

    pub fn midpoint(&self) -> f64 {
        self.energy + 0.5 * self.delta
    }

    pub fn contains(&self, k: usize) -> bool {
        self.member_indices.binary_search(&k).is_ok()
    }
}

/// Members are the `E_k` with `E − tol ≤ E_k < E + δ − tol`.
pub fn energy_shell(h: &HamiltonianSpec, energy: f64, delta: f64) -> Result<EnergyShell> {
    if !(delta > 0.0) || !delta.is_finite() || !energy.is_finite() {
        return Err(Error::param("delta", format!("need finite E and δ > 0, got E={energy}, δ={delta}")));
    }
    let lo = energy - SHELL_TOL;
    let hi = energy + delta - SHELL_TOL;
    let members: Vec<usize> = h
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|(_, &e)| e >= lo && e < hi)
        .map(|(k, _)| k)
        .collect();
    if members.is_empty() {
        return Err(Error::EmptyShell { energy, delta });
    }
    Ok(EnergyShell {
        energy,
        delta,
        member_indices: members,
    })
}

/// The shell and `P_shell / dim(shell)` as a dense matrix.
pub fn microcanonical(
    h: &HamiltonianSpec,
    energy: f64,
    delta: f64,
) -> Result<(EnergyShell, DensityMatrix)> {
    let shell = energy_shell(h, energy, delta)?;
    let n = h.dim();
    let mut w = vec![0.0; n];
    let p = 1.0 / shell.shell_dim() as f64;
    for &k in &shell.member_indices {
        w[k] = p;
    }
    let rho = DensityMatrix::from_spectrum(&w, &h.eigenbasis().to_dense(), h.space().clone())?;
    Ok((shell, rho))
}

/// `tr_{traced} ρ_shell` without forming the composite projector, when the
/// Hamiltonian carries a product eigenbasis aligned with its factors;
/// otherwise falls back to the dense route.
pub fn reduced_shell_density(
    h: &HamiltonianSpec,
    shell: &EnergyShell,
    traced: &[&str],
) -> Result<DensityMatrix> {
    let space = h.space();
    let kept_space = space.without(traced)?;
    let aligned = matches!(h.eigenbasis(), Eigenbasis::Product { factors, .. } if factors.len() == space.len());
    if !aligned {
        let n = h.dim();
        let mut w = vec![0.0; n];
        for &k in &shell.member_indices {
            w[k] = 1.0 / shell.shell_dim() as f64;
        }
        let rho = DensityMatrix::from_spectrum(&w, &h.eigenbasis().to_dense(), space.clone())?;
        return rho.partial_trace(traced);
    }
    let kept: Vec<usize> = (0..space.len())
        .filter(|&m| !traced.contains(&space.factors()[m].0.as_str()))
        .collect();
    let dims = space.dims();
    let kd = kept_space.total_dim();
    let mut counts = vec![0.0f64; kd];
    for &k in &shell.member_indices {
        let idx = h.factor_indices(k);
        let flat = kept.iter().fold(0, |acc, &m| acc * dims[m] + idx[m]);
        counts[flat] += 1.0;
    }
    let total = shell.shell_dim() as f64;
    counts.iter_mut().for_each(|c| *c /= total);
    let bases = h.factor_bases();
    let mut u = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for &m in &kept {
        u = u.kronecker(&bases[m]);
    }
    DensityMatrix::from_spectrum(&counts, &u, kept_space)
}

/// Uniform point on the unit sphere of the shell subspace, as a state on the
/// Hamiltonian's space.
pub fn sample_shell_state(
    stream: &mut RandomStream,
    h: &HamiltonianSpec,
    shell: &EnergyShell,
) -> Result<StateVector> {
    if shell.shell_dim() == 0 {
        return Err(Error::EmptyShell {
            energy: shell.energy,
            delta: shell.delta,
        });
    }
    if let Some(&last) = shell.member_indices.last() {
        if last >= h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                found: last + 1,
            });
        }
    }
    let mut coords = DVector::zeros(h.dim());
    let mut norm2 = 0.0;
    while !(norm2 > 0.0) {
        norm2 = 0.0;
        for &k in &shell.member_indices {
            let z = stream.complex_gaussian_unit();
            norm2 += z.norm_sqr();
            coords[k] = z;
        }
    }
    coords.unscale_mut(norm2.sqrt());
    StateVector::new(h.eigenbasis().embed(&coords), h.space().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_haar_onb;
    use crate::hilbert::{max_abs_diff, partial_trace};
    use crate::thermal::build_composite;

    fn diag(label: &str, e: &[f64]) -> HamiltonianSpec {
        HamiltonianSpec::from_spectrum(label, e, None).unwrap()
    }

    #[test]
    fn shell_is_closed_open() {
        let h = diag("h", &[0.0, 1.0, 2.0, 3.0]);
        let s = energy_shell(&h, 1.0, 2.0).unwrap();
        assert_eq!(s.member_indices, vec![1, 2]);
        // a level within tolerance of the lower edge is in, of the upper edge out
        let s = energy_shell(&h, 1.0 + 1e-13, 2.0 - 1e-13).unwrap();
        assert_eq!(s.member_indices, vec![1, 2]);
        assert!(matches!(energy_shell(&h, 3.5, 0.2), Err(Error::EmptyShell { .. })));
        assert!(energy_shell(&h, 0.0, 0.0).is_err());
    }

    #[test]
    fn full_window_gives_maximally_mixed() {
        let h = diag("h", &[0.0, 0.4, 1.0]);
        let (s, rho) = microcanonical(&h, -1.0, 5.0).unwrap();
        assert_eq!(s.shell_dim(), 3);
        assert!(rho.max_abs_diff(&DensityMatrix::maximally_mixed(h.space().clone())) < 1e-15);
    }

    #[test]
    fn single_member_window_is_projector() {
        let h = diag("h", &[0.0, 1.0, 2.0]);
        let (s, rho) = microcanonical(&h, 0.5, 1.0).unwrap();
        assert_eq!(s.member_indices, vec![1]);
        let p = DensityMatrix::diagonal(&[0.0, 1.0, 0.0], "h").unwrap();
        assert!(rho.max_abs_diff(&p) < 1e-15);
    }

    #[test]
    fn microcanonical_matches_filter_oracle() {
        let mut st = RandomStream::new(4, 0);
        let e: Vec<f64> = (0..9).map(|_| st.standard_normal()).collect();
        let b = sample_haar_onb(&mut st, 9);
        let h = HamiltonianSpec::from_spectrum("h", &e, Some(b.clone())).unwrap();
        let (lo, hi) = (-0.5, 0.8);
        let (_, rho) = microcanonical(&h, lo, hi - lo).unwrap();
        // oracle: sum projectors of the original (unsorted) eigenpairs in the window
        let mut p = DMatrix::<Complex64>::zeros(9, 9);
        let mut count = 0.0;
        for (k, &ek) in e.iter().enumerate() {
            if ek >= lo && ek < hi {
                let v = b.vector(k);
                p += &v * v.adjoint();
                count += 1.0;
            }
        }
        assert!(count > 0.0);
        assert!(max_abs_diff(rho.entries(), &p.unscale(count)) < 1e-12);
    }

    #[test]
    fn reduced_shell_matches_dense_partial_trace() {
        let mut st = RandomStream::new(6, 0);
        let es: Vec<f64> = (0..3).map(|_| st.standard_normal()).collect();
        let eb: Vec<f64> = (0..5).map(|_| st.standard_normal()).collect();
        let hs = HamiltonianSpec::from_spectrum("S", &es, Some(sample_haar_onb(&mut st, 3))).unwrap();
        let hb = HamiltonianSpec::from_spectrum("B", &eb, Some(sample_haar_onb(&mut st, 5))).unwrap();
        let h = build_composite(&hs, &hb).unwrap();
        let (shell, rho) = microcanonical(&h, -0.7, 1.5).unwrap();
        for traced in [["B"], ["S"]] {
            let fast = reduced_shell_density(&h, &shell, &traced).unwrap();
            let slow = partial_trace(&rho, &traced).unwrap();
            assert!(fast.max_abs_diff(&slow) < 1e-13);
        }
    }

    #[test]
    fn shell_samples_live_in_the_shell() {
        let mut st = RandomStream::new(12, 0);
        let hs = diag("S", &[0.0, 1.0]);
        let eb: Vec<f64> = (0..6).map(|_| st.standard_normal()).collect();
        let hb = HamiltonianSpec::from_spectrum("B", &eb, Some(sample_haar_onb(&mut st, 6))).unwrap();
        let h = build_composite(&hs, &hb).unwrap();
        let shell = energy_shell(&h, 0.0, 1.0).unwrap();
        let v = h.eigenbasis().to_dense();
        for _ in 0..20 {
            let psi = sample_shell_state(&mut st, &h, &shell).unwrap();
            assert!(psi.is_normalized(1e-12));
            let coords = v.adjoint() * psi.amplitudes();
            for k in 0..h.dim() {
                if !shell.contains(k) {
                    assert!(coords[k].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_member_shell_sample_is_the_eigenvector() {
        let h = diag("h", &[0.0, 1.0, 2.0]);
        let shell = energy_shell(&h, 0.5, 1.0).unwrap();
        let mut st = RandomStream::new(1, 0);
        let psi = sample_shell_state(&mut st, &h, &shell).unwrap();
        assert!((psi.amplitudes()[1].norm() - 1.0).abs() < 1e-15);
    }
}
