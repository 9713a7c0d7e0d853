//! Exact samplers for the measures on Hilbert space used throughout: the
//! uniform sphere, Gaussian G(ρ), GA(ρ), GAP(ρ) by three independent
//! constructions, D(ρ), Haar-random bases, and a rejection oracle for GA(ρ).
//!
//! Every sampler is a pure function of a [`RandomStream`] and its parameters.

mod measures;
mod oracle;
mod stream;


pub use measures::{
    sample_complex_gaussian, sample_d, sample_g, sample_gap, sample_gap_via_dap,
    sample_gap_via_purification, PreparedDensity,
};
pub use oracle::{rejection_oracle_ga, truncation_tail_bound, OracleDraw, MIN_ORACLE_CAP};
pub use stream::RandomStream;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, OrthonormalBasis, SpaceFactorization, StateVector};

/// Uniform point on the unit sphere of `C^dim` (normalized complex Gaussian).
pub fn sample_uniform_sphere(stream: &mut RandomStream, dim: usize) -> StateVector {
    assert!(dim >= 1, "sphere dimension must be positive");
    loop {
        let v = DVector::from_fn(dim, |_, _| stream.complex_gaussian_unit());
        let n = v.norm();
        if n > 0.0 {
            let space = SpaceFactorization::single("sys", dim).expect("dim >= 1");
            return StateVector::from_parts(v.unscale(n), space);
        }
    }
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the phases
/// of `diag(R)` moved into `Q`.
pub fn sample_haar_unitary(stream: &mut RandomStream, dim: usize) -> DMatrix<Complex64> {
    sample_haar_isometry(stream, dim, dim)
}

/// The first `cols` columns of a Haar unitary on `C^rows`, drawn without
/// forming the rest.
pub fn sample_haar_isometry(stream: &mut RandomStream, rows: usize, cols: usize) -> DMatrix<Complex64> {
    assert!(cols >= 1 && cols <= rows, "isometry shape must satisfy 1 <= cols <= rows");
    let z = DMatrix::from_fn(rows, cols, |_, _| stream.complex_gaussian_unit());
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..rows {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Orthonormal basis whose unitary is Haar distributed.
pub fn sample_haar_onb(stream: &mut RandomStream, dim: usize) -> OrthonormalBasis {
    OrthonormalBasis::new(sample_haar_unitary(stream, dim), "haar")
        .expect("QR factor is unitary to machine precision")
}

/// Random density matrix of the given rank: Haar eigenbasis, eigenvalues
/// proportional to i.i.d. Exp(1) draws, remaining eigenvalues exactly zero.
pub fn random_density(
    stream: &mut RandomStream,
    dim: usize,
    rank: usize,
    label: &str,
) -> Result<DensityMatrix> {
    if rank == 0 || rank > dim {
        return Err(Error::param("rank", format!("must be in 1..={dim}, got {rank}")));
    }
    let u = sample_haar_unitary(stream, dim);
    let mut w: Vec<f64> = (0..dim)
        .map(|i| if i < rank { stream.exponential() } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    DensityMatrix::from_spectrum(&w, &u, SpaceFactorization::single(label, dim)?)
}

/// Which construction produced a batch of GAP samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMethod {
    /// Gaussian, adjust, project.
    GapDef1,
    /// Adjust and project applied to D(ρ).
    DapDef2,
    /// Partial inner product with a purification.
    PurificationDef3,
    /// Truncated rejection sampling of GA(ρ) from G(ρ).
    RejectionOracle,
}

impl GapMethod {
    pub const ALL: [GapMethod; 4] = [
        GapMethod::GapDef1,
        GapMethod::DapDef2,
        GapMethod::PurificationDef3,
        GapMethod::RejectionOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GapMethod::GapDef1 => "gap_def1",
            GapMethod::DapDef2 => "dap_def2",
            GapMethod::PurificationDef3 => "purification_def3",
            GapMethod::RejectionOracle => "rejection_oracle",
        }
    }
}

/// Normalized GAP samples with their provenance.
#[derive(Clone, Debug)]
pub struct GapSampleBatch {
    pub samples: Vec<StateVector>,
    /// Squared norm of each sample before projection (the adjusted measure's
    /// pushforward under `‖·‖²`). For the purification route this is scaled
    /// by `n` so it is comparable with the DA(ρ) norms.
    pub raw_norms: Vec<f64>,
    pub source_rho: DensityMatrix,
    pub method: GapMethod,
    /// Rejection-oracle bookkeeping: total G(ρ) proposals, and the cap.
    pub proposals: Option<u64>,
}

/// One normalized GAP draw with its pre-projection squared norm.
#[derive(Clone, Debug)]
pub struct GapDraw {
    pub state: StateVector,
    /// See [`GapSampleBatch::raw_norms`].
    pub raw_norm: f64,
    /// G(ρ) proposals used by the rejection oracle; 0 for the exact routes.
    pub proposals: u64,
}

/// Draws one GAP(ρ) sample by the given construction.
pub fn draw_gap(
    stream: &mut RandomStream,
    prep: &PreparedDensity,
    method: GapMethod,
    oracle_cap: f64,
) -> Result<GapDraw> {
    let mut proposals = 0;
    let raw = match method {
        GapMethod::GapDef1 => prep.sample_ga(stream),
        GapMethod::DapDef2 => prep.sample_da(stream),
        GapMethod::PurificationDef3 => {
            let v = prep.sample_purification_unnormalized(stream);
            let scaled = v.amplitudes() * Complex64::new((prep.dim() as f64).sqrt(), 0.0);
            StateVector::new(scaled, v.space().clone())?
        }
        GapMethod::RejectionOracle => {
            let draw = rejection_oracle_ga(stream, prep, oracle_cap)?;
            proposals = draw.attempts;
            draw.state
        }
    };
    let raw_norm = raw.norm_squared();
    let state = raw.normalized().ok_or(Error::EmptyInput("zero sample"))?;
    Ok(GapDraw {
        state,
        raw_norm,
        proposals,
    })
}

/// Draws `n` samples; sample `i` uses stream `(seed, first_stream + i)`.
pub fn sample_gap_batch(
    seed: u64,
    first_stream: u64,
    rho: &DensityMatrix,
    method: GapMethod,
    n: usize,
    oracle_cap: f64,
) -> Result<GapSampleBatch> {
    if n == 0 {
        return Err(Error::EmptyInput("batch size must be positive"));
    }
    let prep = PreparedDensity::new(rho);
    let mut samples = Vec::with_capacity(n);
    let mut raw_norms = Vec::with_capacity(n);
    let mut proposals = 0u64;
    for i in 0..n {
        let mut stream = RandomStream::new(seed, first_stream + i as u64);
        let d = draw_gap(&mut stream, &prep, method, oracle_cap)?;
        proposals += d.proposals;
        raw_norms.push(d.raw_norm);
        samples.push(d.state);
    }
    Ok(GapSampleBatch {
        samples,
        raw_norms,
        source_rho: rho.clone(),
        method,
        proposals: (method == GapMethod::RejectionOracle).then_some(proposals),
    })
}
