use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    estimate_density_matrix, overlap, probe_panel, require, Check, DensitySpec, ExperimentKind, ExperimentReport,
    HamiltonianConfig, ReportBuilder, RunContext, ShellConfig, TrialTable,
};
use crate::conditional::sample_conditional_wf;
use crate::ensembles::{sample_haar_isometry, sample_haar_onb, sample_uniform_sphere, PreparedDensity, RandomStream};
use crate::error::{Error, Result};
use crate::hilbert::{trace_distance, DensityMatrix, StateVector};
use crate::stats::{bonferroni, ks_two_sample};
use crate::thermal::{
    build_composite, canonical_density_matrix, match_beta, reduced_shell_density, sample_shell_state, EnergyShell,
    HamiltonianSpec, SpectrumModel,
};

const SYS: &str = "S";
const BATH: &str = "B";

/// How the bath basis is drawn for each trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisSampling {
    /// Full Haar unitary on the bath, then a basis measurement.
    Full,
    /// Only the `dim_S` columns of the bath unitary that meet the state.
    /// Same law as `Full`: if `N = WR` is a thin QR of the bath-by-system
    /// amplitude matrix, the rows of `U†N` are those of `(U†W)R` and `U†W`
    /// is a Haar isometry independent of `Ψ`.
    Isometry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeredityParams {
    pub enabled: bool,
    pub rho1: DensitySpec,
    pub rho2: DensitySpec,
    pub samples: usize,
}

impl Default for HeredityParams {
    fn default() -> Self {
        Self {
            enabled: true,
            rho1: DensitySpec::Diagonal { weights: vec![0.8, 0.2] },
            rho2: DensitySpec::Random { dim: 16, rank: 16, seed: 2 },
            samples: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapDistributionParams {
    pub system: HamiltonianConfig,
    pub bath: HamiltonianConfig,
    pub shell: ShellConfig,
    /// Conditional wave functions, one per shell state.
    pub samples: usize,
    pub basis_sampling: BasisSampling,
    pub probes: usize,
    /// Level of each probe battery.
    pub alpha: f64,
    pub covariance_tolerance: f64,
    /// Repeat with a flat system Hamiltonian and compare with the sphere.
    pub flat_case: bool,
    /// `Ψ ~ GAP(ρ₁⊗ρ₂)` conditioned on a Haar basis of the second factor.
    pub heredity: HeredityParams,
}

impl Default for GapDistributionParams {
    fn default() -> Self {
        Self {
            system: HamiltonianConfig::equal_spaced(2, 1.0),
            bath: HamiltonianConfig {
                dim: 512,
                model: SpectrumModel::Semicircle,
                scale: 1.0,
                haar_basis: false,
            },
            shell: ShellConfig::fraction(0.3, 0.25),
            samples: 10_000,
            basis_sampling: BasisSampling::Isometry,
            probes: 5,
            alpha: 0.01,
            covariance_tolerance: 0.05,
            flat_case: true,
            heredity: HeredityParams::default(),
        }
    }
}

impl GapDistributionParams {
    pub(crate) fn validate(&self) -> Result<()> {
        self.system.validate("system")?;
        self.bath.validate("bath")?;
        self.shell.validate("shell")?;
        require(self.samples >= 1, "samples", "must be at least 1")?;
        require(self.probes >= 1, "probes", "must be at least 1")?;
        require(self.alpha > 0.0 && self.alpha < 1.0, "alpha", "must lie in (0, 1)")?;
        require(self.covariance_tolerance > 0.0, "covariance_tolerance", "must be positive")?;
        require(self.bath.dim >= self.system.dim, "bath.dim", "must be at least system.dim")?;
        let h = &self.heredity;
        if h.enabled {
            h.rho1.validate("heredity.rho1")?;
            h.rho2.validate("heredity.rho2")?;
            require(h.samples >= 1, "heredity.samples", "must be at least 1")?;
        }
        Ok(())
    }
}

/// One conditional wave function of a shell state on `S ⊗ B`, with the
/// probability of its outcome.
fn shell_conditional(
    s: &mut RandomStream,
    comp: &HamiltonianSpec,
    shell: &EnergyShell,
    sampling: BasisSampling,
) -> Result<(DVector<Complex64>, f64)> {
    let psi = sample_shell_state(s, comp, shell)?;
    match sampling {
        BasisSampling::Full => {
            let onb = sample_haar_onb(s, comp.space().dim_of(BATH)?).relabeled(BATH);
            let out = sample_conditional_wf(s, &psi, &onb)?;
            Ok((out.conditional_state.into_amplitudes(), out.weight))
        }
        BasisSampling::Isometry => {
            // dim_S × dim_B, so N = Mᵀ is bath by system
            let n = psi.factor_matrix(&[BATH])?.transpose();
            let (rows, cols) = n.shape();
            let qr = n.qr();
            let v = sample_haar_isometry(s, rows, cols);
            let c: DMatrix<Complex64> = v * qr.r();
            let weights: Vec<f64> = c.row_iter().map(|r| r.norm_squared()).collect();
            let y = s.weighted_index(&weights);
            let w = weights[y];
            if w <= 0.0 {
                return Err(Error::ZeroConditionalNorm(y));
            }
            Ok((c.row(y).transpose().unscale(w.sqrt()), w))
        }
    }
}

struct Battery {
    covariance_distance: f64,
    tests: Vec<(usize, crate::stats::TestResult)>,
}

/// Covariance of `sample` against `rho`, and probe KS of `sample` against
/// `reference`.
fn battery(sample: &[DVector<Complex64>], reference: &[DVector<Complex64>], rho: &DensityMatrix, probes: &[DVector<Complex64>]) -> Result<Battery> {
    let space = rho.space().clone();
    let states: Vec<StateVector> = sample.iter().map(|v| StateVector::new(v.clone(), space.clone())).collect::<Result<_>>()?;
    let covariance_distance = trace_distance(&estimate_density_matrix(&states)?, rho)?;
    let mut tests = Vec::new();
    for (k, ph) in probes.iter().enumerate() {
        let x: Vec<f64> = sample.iter().map(|v| overlap(ph, v)).collect();
        let y: Vec<f64> = reference.iter().map(|v| overlap(ph, v)).collect();
        tests.push((k, ks_two_sample(&x, &y)?));
    }
    Ok(Battery { covariance_distance, tests })
}

pub(super) fn run(p: &GapDistributionParams, ctx: &RunContext) -> Result<ExperimentReport> {
    let mut report = ReportBuilder::new(
        ExperimentKind::GapDistribution,
        ctx.seed(),
        serde_json::to_value(p)?,
        TrialTable::new(&["run", "trial", "outcome_weight", "probe0"]),
    );
    let level = bonferroni(p.alpha, p.probes);
    let source = format!("level {} split over {} probes", p.alpha, p.probes);
    let probes = probe_panel(p.system.dim, p.probes);

    let mut hs = ctx.stream("gap_distribution/hamiltonians", 0);
    let system = p.system.build(&mut hs, SYS)?;
    let bath = p.bath.build(&mut hs, BATH)?;
    let flat_cfg = HamiltonianConfig {
        scale: 0.0,
        model: SpectrumModel::EqualSpaced,
        ..p.system.clone()
    };
    let flat_system = flat_cfg.build(&mut hs, SYS)?;

    let mut runs: Vec<(&str, &HamiltonianSpec)> = vec![("main", &system)];
    if p.flat_case {
        runs.push(("flat", &flat_system));
    }
    for (ri, (name, sys)) in runs.into_iter().enumerate() {
        let comp = build_composite(sys, &bath)?;
        let shell = p.shell.resolve(&comp)?;
        let beta = match_beta(&comp, shell.midpoint())?;
        let rho_beta = canonical_density_matrix(sys, beta)?;
        let mc = reduced_shell_density(&comp, &shell, &[BATH])?;
        report.stat(format!("{name}.beta"), beta);
        report.stat(format!("{name}.shell_dim"), shell.shell_dim() as f64);
        report.stat(format!("{name}.microcanonical_distance"), trace_distance(&mc, &rho_beta)?);
        for k in 0..rho_beta.dim() {
            report.predict(format!("{name}.rho_beta[{k}{k}]"), rho_beta.entries()[(k, k)].re);
        }

        let draws = ctx.trials(&format!("gap_distribution/{name}/conditionals"), p.samples, |_, s| {
            shell_conditional(s, &comp, &shell, p.basis_sampling)
        })?;
        let reference: Vec<DVector<Complex64>> = if name == "flat" {
            ctx.trials("gap_distribution/flat/sphere", p.samples, |_, s| {
                Ok(sample_uniform_sphere(s, sys.dim()).into_amplitudes())
            })?
        } else {
            let prep = PreparedDensity::new(&rho_beta);
            ctx.trials("gap_distribution/main/reference", p.samples, |_, s| Ok(prep.sample_gap(s).into_amplitudes()))?
        };
        report.add_samples(2 * p.samples);
        for (t, (v, w)) in draws.iter().enumerate() {
            report.trials().push(vec![ri as f64, t as f64, *w, overlap(&probes[0], v)]);
        }
        let sample: Vec<DVector<Complex64>> = draws.into_iter().map(|(v, _)| v).collect();
        let b = battery(&sample, &reference, &rho_beta, &probes)?;
        report.stat(format!("{name}.covariance_distance"), b.covariance_distance);
        report.check(Check::at_most(
            format!("{name}.covariance"),
            b.covariance_distance,
            0.0,
            p.covariance_tolerance,
            "3/sqrt(N) plus typicality slack, frozen from a pilot run",
        ));
        let against = if name == "flat" { "sphere" } else { "gap" };
        for (k, r) in b.tests {
            report.check(Check::test(format!("{name}.ks_vs_{against}[probe{k}]"), r, level, source.clone()));
        }
    }

    let h = &p.heredity;
    if h.enabled {
        let rho1 = h.rho1.build("S")?;
        let rho2 = h.rho2.build("R")?;
        let joint = PreparedDensity::new(&rho1.tensor(&rho2)?);
        let d2 = rho2.dim();
        let conditionals = ctx.trials("gap_distribution/heredity/conditionals", h.samples, |_, s| {
            let psi = joint.sample_gap(s);
            let onb = sample_haar_onb(s, d2).relabeled("R");
            let out = sample_conditional_wf(s, &psi, &onb)?;
            Ok((out.conditional_state.into_amplitudes(), out.weight))
        })?;
        let prep1 = PreparedDensity::new(&rho1);
        let reference = ctx.trials("gap_distribution/heredity/reference", h.samples, |_, s| {
            Ok(prep1.sample_gap(s).into_amplitudes())
        })?;
        report.add_samples(2 * h.samples);
        let hprobes = probe_panel(rho1.dim(), p.probes);
        for (t, (v, w)) in conditionals.iter().enumerate() {
            report.trials().push(vec![2.0, t as f64, *w, overlap(&hprobes[0], v)]);
        }
        let sample: Vec<DVector<Complex64>> = conditionals.into_iter().map(|(v, _)| v).collect();
        let b = battery(&sample, &reference, &rho1, &hprobes)?;
        report.stat("heredity.covariance_distance", b.covariance_distance);
        report.check(Check::at_most(
            "heredity.covariance",
            b.covariance_distance,
            0.0,
            3.0 / (h.samples as f64).sqrt(),
            "Monte Carlo scale 3/sqrt(N)",
        ));
        for (k, r) in b.tests {
            report.check(Check::test(format!("heredity.ks_vs_gap[probe{k}]"), r, level, source.clone()));
        }
    }
    Ok(report.finish())
}
