use serde::{Deserialize, Serialize};

use super::{channel_seed, require};
use crate::ensembles::{random_density, RandomStream};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, SpaceFactorization};
use crate::thermal::{energy_shell, synth_bath_spectrum, EnergyShell, HamiltonianSpec, SpectrumModel};

/// A synthetic Hamiltonian. `dim = 1` is the trivial one-level system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    pub dim: usize,
    #[serde(default = "default_model")]
    pub model: SpectrumModel,
    /// Level spacing; 0 gives a flat spectrum (equal_spaced only).
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Haar-random eigenbasis instead of the computational one.
    #[serde(default)]
    pub haar_basis: bool,
}

fn default_model() -> SpectrumModel {
    SpectrumModel::EqualSpaced
}

fn default_scale() -> f64 {
    1.0
}

impl HamiltonianConfig {
    pub fn equal_spaced(dim: usize, scale: f64) -> Self {
        Self {
            dim,
            model: SpectrumModel::EqualSpaced,
            scale,
            haar_basis: false,
        }
    }

    pub(crate) fn validate(&self, key: &str) -> Result<()> {
        require(self.dim >= 1, &format!("{key}.dim"), "must be at least 1")?;
        require(self.scale.is_finite() && self.scale >= 0.0, &format!("{key}.scale"), "must be finite and non-negative")?;
        if self.model != SpectrumModel::EqualSpaced && self.dim >= 2 {
            require(self.scale > 0.0, &format!("{key}.scale"), "must be positive for this spectrum model")?;
        }
        Ok(())
    }

    /// Draws the Hamiltonian; randomness (Poisson gaps, Haar basis) comes
    /// from `stream`.
    pub fn build(&self, stream: &mut RandomStream, label: &str) -> Result<HamiltonianSpec> {
        if self.dim == 1 {
            return HamiltonianSpec::from_spectrum(label, &[0.0], None);
        }
        synth_bath_spectrum(stream, label, self.dim, self.model, self.scale, self.haar_basis)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellPlacement {
    /// `energy` and `delta` are absolute.
    Absolute,
    /// `energy` and `delta` are fractions of the spectral range, measured
    /// from the ground level.
    Fraction,
}

/// The window `[E, E+δ)` of a composite Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellConfig {
    pub placement: ShellPlacement,
    pub energy: f64,
    pub delta: f64,
    #[serde(default = "default_min_shell_dim")]
    pub min_shell_dim: usize,
}

fn default_min_shell_dim() -> usize {
    100
}

impl ShellConfig {
    pub fn fraction(energy: f64, delta: f64) -> Self {
        Self {
            placement: ShellPlacement::Fraction,
            energy,
            delta,
            min_shell_dim: default_min_shell_dim(),
        }
    }

    pub fn absolute(energy: f64, delta: f64) -> Self {
        Self {
            placement: ShellPlacement::Absolute,
            energy,
            delta,
            min_shell_dim: default_min_shell_dim(),
        }
    }

    pub(crate) fn validate(&self, key: &str) -> Result<()> {
        require(self.energy.is_finite(), &format!("{key}.energy"), "must be finite")?;
        require(self.delta.is_finite() && self.delta > 0.0, &format!("{key}.delta"), "must be positive")?;
        require(self.min_shell_dim >= 1, &format!("{key}.min_shell_dim"), "must be at least 1")?;
        if self.placement == ShellPlacement::Fraction {
            require((0.0..=1.0).contains(&self.energy), &format!("{key}.energy"), "fraction must lie in [0, 1]")?;
        }
        Ok(())
    }

    /// Absolute `(E, δ)` for `h`.
    pub fn window(&self, h: &HamiltonianSpec) -> (f64, f64) {
        match self.placement {
            ShellPlacement::Absolute => (self.energy, self.delta),
            ShellPlacement::Fraction => {
                let lo = h.min_energy();
                let range = h.max_energy() - lo;
                (lo + self.energy * range, self.delta * range)
            }
        }
    }

    /// The shell of `h`, failing when it has fewer than `min_shell_dim` levels.
    pub fn resolve(&self, h: &HamiltonianSpec) -> Result<EnergyShell> {
        let (e, d) = self.window(h);
        let shell = energy_shell(h, e, d)?;
        if shell.shell_dim() < self.min_shell_dim {
            return Err(Error::ShellTooSmall {
                found: shell.shell_dim(),
                floor: self.min_shell_dim,
            });
        }
        Ok(shell)
    }
}

/// A density matrix given in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    MaximallyMixed { dim: usize },
    /// Diagonal in the computational basis; weights are normalized.
    Diagonal { weights: Vec<f64> },
    /// Haar eigenbasis with Exp(1) eigenvalues on `rank` levels, drawn from a
    /// stream fixed by `seed` (not by the run seed).
    Random {
        dim: usize,
        rank: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl DensitySpec {
    pub fn dim(&self) -> usize {
        match self {
            DensitySpec::MaximallyMixed { dim } | DensitySpec::Random { dim, .. } => *dim,
            DensitySpec::Diagonal { weights } => weights.len(),
        }
    }

    pub(crate) fn validate(&self, key: &str) -> Result<()> {
        match self {
            DensitySpec::MaximallyMixed { dim } => require(*dim >= 1, &format!("{key}.dim"), "must be at least 1"),
            DensitySpec::Diagonal { weights } => {
                require(!weights.is_empty(), &format!("{key}.weights"), "must not be empty")?;
                require(
                    weights.iter().all(|w| w.is_finite() && *w >= 0.0),
                    &format!("{key}.weights"),
                    "must be finite and non-negative",
                )?;
                require(weights.iter().sum::<f64>() > 0.0, &format!("{key}.weights"), "must not all be zero")
            }
            DensitySpec::Random { dim, rank, seed } => {
                require(*dim >= 1, &format!("{key}.dim"), "must be at least 1")?;
                require(*rank >= 1 && rank <= dim, &format!("{key}.rank"), "must lie in 1..=dim")?;
                require(*seed <= i64::MAX as u64, &format!("{key}.seed"), "must fit a signed 64-bit integer")
            }
        }
    }

    pub fn build(&self, label: &str) -> Result<DensityMatrix> {
        match self {
            DensitySpec::MaximallyMixed { dim } => Ok(DensityMatrix::maximally_mixed(SpaceFactorization::single(label, *dim)?)),
            DensitySpec::Diagonal { weights } => {
                let total: f64 = weights.iter().sum();
                let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
                DensityMatrix::diagonal(&w, label)
            }
            DensitySpec::Random { dim, rank, seed } => {
                let mut s = RandomStream::new(channel_seed(*seed, "density"), 0);
                random_density(&mut s, *dim, *rank, label)
            }
        }
    }

    /// Short tag used in check names.
    pub fn tag(&self) -> String {
        match self {
            DensitySpec::MaximallyMixed { dim } => format!("mixed{dim}"),
            DensitySpec::Diagonal { weights } => format!("diag{}", weights.len()),
            DensitySpec::Random { dim, rank, .. } => format!("random{dim}r{rank}"),
        }
    }

    pub fn is_maximally_mixed(&self) -> bool {
        match self {
            DensitySpec::MaximallyMixed { .. } => true,
            DensitySpec::Diagonal { weights } => weights.windows(2).all(|w| w[0] == w[1]),
            DensitySpec::Random { dim, rank, .. } => *dim == 1 && *rank == 1,
        }
    }
}
