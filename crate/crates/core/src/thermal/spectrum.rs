use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HamiltonianSpec;
use crate::ensembles::{sample_haar_onb, RandomStream};
use crate::error::{Error, Result};

/// Synthetic level-distribution models for a bath.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumModel {
    /// `0, s, 2s, ...`; `s = 0` gives a flat spectrum.
    EqualSpaced,
    /// Cumulative sums of i.i.d. exponential spacings with mean `s`, from 0.
    PoissonGaps,
    /// Midpoint quantiles of the semicircle law of radius `s·dim/2`, so the
    /// mean level spacing is `s`.
    Semicircle,
}

impl SpectrumModel {
    pub const ALL: [SpectrumModel; 3] = [
        SpectrumModel::EqualSpaced,
        SpectrumModel::PoissonGaps,
        SpectrumModel::Semicircle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpectrumModel::EqualSpaced => "equal_spaced",
            SpectrumModel::PoissonGaps => "poisson_gaps",
            SpectrumModel::Semicircle => "semicircle",
        }
    }
}

impl fmt::Display for SpectrumModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpectrumModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::param("model", format!("unknown spectrum model '{s}'")))
    }
}

/// CDF of the semicircle law on `[−r, r]`.
fn semicircle_cdf(x: f64, r: f64) -> f64 {
    let t = (x / r).clamp(-1.0, 1.0);
    0.5 + (t * (1.0 - t * t).sqrt() + t.asin()) / std::f64::consts::PI
}

/// Quantiles `F⁻¹((i + ½)/n)` of the semicircle law of radius `r`, ascending.
/// Exactly antisymmetric: `x_i = −x_{n−1−i}`.
pub fn semicircle_quantiles(n: usize, r: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n / 2 {
        let q = (i as f64 + 0.5) / n as f64;
        let (mut lo, mut hi) = (-r, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if semicircle_cdf(mid, r) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out[i] = 0.5 * (lo + hi);
        out[n - 1 - i] = -out[i];
    }
    out
}

/// A bath Hamiltonian labeled `label` with the model spectrum; the
/// eigenbasis is Haar random when `haar_basis` is set, else computational.
pub fn synth_bath_spectrum(
    stream: &mut RandomStream,
    label: &str,
    dim: usize,
    model: SpectrumModel,
    scale: f64,
    haar_basis: bool,
) -> Result<HamiltonianSpec> {
    if dim < 2 {
        return Err(Error::param("dim", format!("need at least 2 levels, got {dim}")));
    }
    let scale_ok = match model {
        SpectrumModel::EqualSpaced => scale >= 0.0 && scale.is_finite(),
        _ => scale > 0.0 && scale.is_finite(),
    };
    if !scale_ok {
        return Err(Error::param("scale", format!("invalid for {model}: {scale}")));
    }
    let energies: Vec<f64> = match model {
        SpectrumModel::EqualSpaced => (0..dim).map(|i| scale * i as f64).collect(),
        SpectrumModel::PoissonGaps => {
            let mut e = Vec::with_capacity(dim);
            let mut acc = 0.0;
            e.push(acc);
            for _ in 1..dim {
                acc += scale * stream.exponential();
                e.push(acc);
            }
            e
        }
        SpectrumModel::Semicircle => semicircle_quantiles(dim, 0.5 * scale * dim as f64),
    };
    let basis = haar_basis.then(|| sample_haar_onb(stream, dim));
    HamiltonianSpec::from_spectrum(label, &energies, basis)
}
