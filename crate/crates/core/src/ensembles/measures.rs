use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{sample_uniform_sphere, RandomStream};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, SpaceFactorization, StateVector};

/// Complex Gaussian with `E|X|² = variance`.
pub fn sample_complex_gaussian(stream: &mut RandomStream, variance: f64) -> Result<Complex64> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::param("variance", format!("must be positive, got {variance}")));
    }
    Ok(stream.complex_gaussian_unit() * variance.sqrt())
}

/// A density matrix prepared for repeated sampling: eigen-decomposition,
/// the `√(nρ)` map and the Schmidt purification, computed once.
#[derive(Clone, Debug)]
pub struct PreparedDensity {
    rho: DensityMatrix,
    weights: Vec<f64>,
    vectors: DMatrix<Complex64>,
    sqrt_n_rho: DMatrix<Complex64>,
    purification: StateVector,
    max_weight: f64,
}

impl PreparedDensity {
    pub fn new(rho: &DensityMatrix) -> Self {
        let spec = rho.spectral();
        // eigenvalues within the PSD floor are clamped; zero weights stay in place
        let mut weights: Vec<f64> = spec.eigenvalues.iter().map(|&p| p.max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|p| *p /= total);
        let vectors = spec.eigenvectors;
        let n = weights.len();

        let root = DMatrix::from_fn(n, n, |r, c| vectors[(r, c)] * (n as f64 * weights[c]).sqrt());
        let sqrt_n_rho = root * vectors.adjoint();

        // Φ = Σ_j √p_j |j⟩ ⊗ |e_j⟩ on H ⊗ H₂
        let mut phi = DVector::zeros(n * n);
        for j in 0..n {
            let amp = weights[j].sqrt();
            for r in 0..n {
                phi[r * n + j] = vectors[(r, j)] * amp;
            }
        }
        let space = SpaceFactorization::new([("sys", n), ("aux", n)])
            .expect("two distinct nonzero factors");
        let purification = StateVector::from_parts(phi, space);

        let max_weight = weights.iter().copied().fold(0.0, f64::max);
        Self {
            rho: rho.clone(),
            weights,
            vectors,
            sqrt_n_rho,
            purification,
            max_weight,
        }
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Eigenvalues of ρ (ascending, clamped at zero, summing to one).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    pub fn max_weight(&self) -> f64 {
        self.max_weight
    }

    /// `Φ ∈ 𝕊(H ⊗ H₂)` with `tr₂|Φ⟩⟨Φ| = ρ`.
    pub fn purification(&self) -> &StateVector {
        &self.purification
    }

    fn state(&self, amplitudes: DVector<Complex64>) -> StateVector {
        StateVector::from_parts(amplitudes, self.rho.space().clone())
    }

    fn from_eigen_coords(&self, coords: &DVector<Complex64>) -> StateVector {
        self.state(&self.vectors * coords)
    }

    /// `Σ_j X_j |j⟩` with independent `X_j` of variance `p_j`.
    pub fn sample_g(&self, stream: &mut RandomStream) -> StateVector {
        let coords = DVector::from_iterator(
            self.dim(),
            self.weights
                .iter()
                .map(|&p| stream.complex_gaussian_unit() * p.sqrt()),
        );
        self.from_eigen_coords(&coords)
    }

    /// Exact draw from GA(ρ), i.e. G(ρ) reweighted by `‖ψ‖²`.
    ///
    /// The reweighted density splits as `Σ_J p_J · (|x_J|²/p_J) Π_j g_{p_j}(x_j)`:
    /// pick `J` with probability `p_J`, size-bias coordinate `J`
    /// (`|X_J|² ~ Gamma(2, p_J)`, uniform phase), leave the others Gaussian.
    pub fn sample_ga(&self, stream: &mut RandomStream) -> StateVector {
        let big = stream.weighted_index(&self.weights);
        let coords = DVector::from_iterator(
            self.dim(),
            self.weights.iter().enumerate().map(|(j, &p)| {
                if j == big {
                    let r2 = p * (stream.exponential() + stream.exponential());
                    stream.phase() * r2.sqrt()
                } else {
                    stream.complex_gaussian_unit() * p.sqrt()
                }
            }),
        );
        self.from_eigen_coords(&coords)
    }

    /// GAP(ρ) by Gaussian, adjust, project.
    pub fn sample_gap(&self, stream: &mut RandomStream) -> StateVector {
        normalize(self.sample_ga(stream))
    }

    /// `√(nρ) Ψᵘ` with `Ψᵘ` uniform on the unit sphere.
    pub fn sample_d(&self, stream: &mut RandomStream) -> StateVector {
        let u = sample_uniform_sphere(stream, self.dim());
        self.state(&self.sqrt_n_rho * u.amplitudes())
    }

    /// D(ρ) reweighted by `‖ψ‖²`. The weight is bounded by `n·p_max`, so
    /// plain rejection against that bound is exact.
    pub fn sample_da(&self, stream: &mut RandomStream) -> StateVector {
        let bound = self.dim() as f64 * self.max_weight;
        loop {
            let psi = self.sample_d(stream);
            if stream.uniform() * bound < psi.norm_squared() {
                return psi;
            }
        }
    }

    pub fn sample_gap_via_dap(&self, stream: &mut RandomStream) -> StateVector {
        normalize(self.sample_da(stream))
    }

    /// Draws `Ψ₂` from `n‖⟨ψ₂|Φ⟩‖² u₂(dψ₂)` by rejection (the density is
    /// bounded by `n·p_max`) and returns the unnormalized `⟨Ψ₂|Φ⟩`.
    pub fn sample_purification_unnormalized(&self, stream: &mut RandomStream) -> StateVector {
        loop {
            let psi2 = sample_uniform_sphere(stream, self.dim());
            let out = self
                .purification
                .partial_inner("aux", psi2.amplitudes())
                .expect("aux factor has matching dimension");
            if stream.uniform() * self.max_weight < out.norm_squared() {
                return self.state(out.into_amplitudes());
            }
        }
    }

    pub fn sample_gap_via_purification(&self, stream: &mut RandomStream) -> StateVector {
        normalize(self.sample_purification_unnormalized(stream))
    }
}

fn normalize(psi: StateVector) -> StateVector {
    psi.normalized()
        .expect("sampled vectors are nonzero with probability one")
}

pub fn sample_g(stream: &mut RandomStream, rho: &DensityMatrix) -> StateVector {
    PreparedDensity::new(rho).sample_g(stream)
}

pub fn sample_gap(stream: &mut RandomStream, rho: &DensityMatrix) -> StateVector {
    PreparedDensity::new(rho).sample_gap(stream)
}

pub fn sample_d(stream: &mut RandomStream, rho: &DensityMatrix) -> StateVector {
    PreparedDensity::new(rho).sample_d(stream)
}

pub fn sample_gap_via_dap(stream: &mut RandomStream, rho: &DensityMatrix) -> StateVector {
    PreparedDensity::new(rho).sample_gap_via_dap(stream)
}

pub fn sample_gap_via_purification(stream: &mut RandomStream, rho: &DensityMatrix) -> StateVector {
    PreparedDensity::new(rho).sample_gap_via_purification(stream)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_gaussian_rejects_bad_variance() {
        let mut s = RandomStream::new(0, 0);
        assert!(sample_complex_gaussian(&mut s, 0.0).is_err());
        assert!(sample_complex_gaussian(&mut s, -1.0).is_err());
        assert!(sample_complex_gaussian(&mut s, f64::NAN).is_err());
    }

    #[test]
    fn rank_one_g_is_on_the_axis() {
        let rho = DensityMatrix::diagonal(&[1.0, 0.0, 0.0], "q").unwrap();
        let prep = PreparedDensity::new(&rho);
        let mut s = RandomStream::new(4, 0);
        for _ in 0..200 {
            let psi = prep.sample_g(&mut s);
            assert!(psi.amplitudes()[1].norm() < 1e-15);
            assert!(psi.amplitudes()[2].norm() < 1e-15);
        }
    }

    #[test]
    fn d_of_maximally_mixed_is_the_sphere_sample() {
        let rho = DensityMatrix::maximally_mixed(SpaceFactorization::single("q", 3).unwrap());
        let prep = PreparedDensity::new(&rho);
        let mut a = RandomStream::new(8, 2);
        let mut b = RandomStream::new(8, 2);
        let d = prep.sample_d(&mut a);
        let u = sample_uniform_sphere(&mut b, 3);
        assert!((d.amplitudes() - u.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn d_of_rank_one_is_scaled_first_coordinate() {
        let rho = DensityMatrix::diagonal(&[1.0, 0.0], "q").unwrap();
        let prep = PreparedDensity::new(&rho);
        let mut a = RandomStream::new(13, 0);
        let mut b = RandomStream::new(13, 0);
        for _ in 0..100 {
            let d = prep.sample_d(&mut a);
            let u = sample_uniform_sphere(&mut b, 2);
            // the eigenvector for weight 1 is e0 up to a phase
            assert!(d.amplitudes()[1].norm() < 1e-12);
            let want = 2f64.sqrt() * u.amplitudes()[0].norm();
            assert!((d.amplitudes()[0].norm() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn purification_reduces_to_rho() {
        let rho = DensityMatrix::diagonal(&[0.5, 0.3, 0.2], "q").unwrap();
        let prep = PreparedDensity::new(&rho);
        let phi = prep.purification();
        assert!((phi.norm() - 1.0).abs() < 1e-14);
        let red = phi.reduced_density(&["aux"]).unwrap();
        assert!(red.max_abs_diff(&rho) < 1e-14);
    }

    #[test]
    fn pure_rho_purification_returns_the_vector() {
        let v = DVector::from_vec(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
        ]);
        let space = SpaceFactorization::single("q", 2).unwrap();
        let rho = StateVector::new(v.clone(), space).unwrap().projector().unwrap();
        let prep = PreparedDensity::new(&rho);
        let mut s = RandomStream::new(2, 0);
        for _ in 0..50 {
            let psi = prep.sample_gap_via_purification(&mut s);
            assert!((psi.amplitudes().dotc(&v).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn every_gap_sampler_returns_unit_vectors() {
        let rho = DensityMatrix::diagonal(&[0.6, 0.3, 0.1, 0.0], "q").unwrap();
        let prep = PreparedDensity::new(&rho);
        let mut s = RandomStream::new(77, 0);
        for _ in 0..200 {
            for psi in [
                prep.sample_gap(&mut s),
                prep.sample_gap_via_dap(&mut s),
                prep.sample_gap_via_purification(&mut s),
            ] {
                assert!(psi.is_normalized(1e-12));
                // zero eigenvalue direction stays empty
                assert!(psi.amplitudes()[3].norm() < 1e-14);
            }
        }
    }
}
