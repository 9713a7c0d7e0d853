use serde::{Deserialize, Serialize};

use super::{require, Check, ExperimentKind, ExperimentReport, HamiltonianConfig, ReportBuilder, RunContext, ShellConfig, TrialTable};
use crate::ensembles::sample_uniform_sphere;
use crate::error::Result;
use crate::hilbert::{trace_distance, DensityMatrix};
use crate::stats::{ks_two_sample, mean, quantile};
use crate::thermal::{
    build_composite, canonical_density_matrix, match_beta, reduced_shell_density, sample_shell_state, HamiltonianSpec,
};

const SYS: &str = "S";
const BATH: &str = "B";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TypicalityParams {
    pub system: HamiltonianConfig,
    pub bath: HamiltonianConfig,
    pub shell: ShellConfig,
    pub samples: usize,
    /// Per-draw trace-distance threshold.
    pub threshold: f64,
    /// Required fraction of draws below the threshold.
    pub min_fraction: f64,
    /// The bath dimension is multiplied by this for the scaling check;
    /// 1 disables it.
    pub bath_scale_factor: usize,
    /// Compare a full-window shell against the uniform sphere.
    pub control: bool,
    pub alpha: f64,
}

impl Default for TypicalityParams {
    fn default() -> Self {
        Self {
            system: HamiltonianConfig::equal_spaced(4, 1.0),
            bath: HamiltonianConfig::equal_spaced(256, 1.0),
            shell: ShellConfig::fraction(0.3, 0.25),
            samples: 200,
            threshold: 0.15,
            min_fraction: 0.95,
            bath_scale_factor: 4,
            control: true,
            alpha: 0.01,
        }
    }
}

impl TypicalityParams {
    pub(crate) fn validate(&self) -> Result<()> {
        self.system.validate("system")?;
        self.bath.validate("bath")?;
        self.shell.validate("shell")?;
        require(self.samples >= 1, "samples", "must be at least 1")?;
        require(self.threshold > 0.0, "threshold", "must be positive")?;
        require((0.0..=1.0).contains(&self.min_fraction), "min_fraction", "must lie in [0, 1]")?;
        require(self.bath_scale_factor >= 1, "bath_scale_factor", "must be at least 1")?;
        require(self.alpha > 0.0 && self.alpha < 1.0, "alpha", "must lie in (0, 1)")
    }
}

struct ShellRun {
    distances: Vec<f64>,
    beta: f64,
    shell_dim: usize,
    microcanonical_distance: f64,
}

fn shell_run(
    ctx: &RunContext,
    channel: &str,
    system: &HamiltonianSpec,
    bath: &HamiltonianSpec,
    shell_cfg: &ShellConfig,
    n: usize,
) -> Result<ShellRun> {
    let comp = build_composite(system, bath)?;
    let shell = shell_cfg.resolve(&comp)?;
    let beta = match_beta(&comp, shell.midpoint())?;
    let rho_beta = canonical_density_matrix(system, beta)?;
    let mc = reduced_shell_density(&comp, &shell, &[BATH])?;
    let distances = ctx.trials(channel, n, |_, s| {
        let psi = sample_shell_state(s, &comp, &shell)?;
        trace_distance(&psi.reduced_density(&[BATH])?, &rho_beta)
    })?;
    Ok(ShellRun {
        distances,
        beta,
        shell_dim: shell.shell_dim(),
        microcanonical_distance: trace_distance(&mc, &rho_beta)?,
    })
}

pub(super) fn run(p: &TypicalityParams, ctx: &RunContext) -> Result<ExperimentReport> {
    let mut report = ReportBuilder::new(
        ExperimentKind::CanonicalTypicality,
        ctx.seed(),
        serde_json::to_value(p)?,
        TrialTable::new(&["run", "trial", "trace_distance"]),
    );
    let mut hs = ctx.stream("typicality/hamiltonians", 0);
    let system = p.system.build(&mut hs, SYS)?;
    let bath = p.bath.build(&mut hs, BATH)?;

    let base = shell_run(ctx, "typicality/base", &system, &bath, &p.shell, p.samples)?;
    report.add_samples(p.samples);
    report.stat("beta", base.beta);
    report.stat("shell_dim", base.shell_dim as f64);
    report.stat("microcanonical_distance", base.microcanonical_distance);
    report.stat("mean_distance", mean(&base.distances));
    report.stat("q95_distance", quantile(&base.distances, 0.95));
    report.stat("max_distance", base.distances.iter().copied().fold(0.0, f64::max));
    let within = base.distances.iter().filter(|&&d| d < p.threshold).count() as f64 / p.samples as f64;
    report.stat("fraction_within_threshold", within);
    report.check(Check::at_least(
        "fraction_within_threshold",
        within,
        p.min_fraction,
        0.0,
        format!("threshold {} frozen from a pilot run of the brute-force pipeline", p.threshold),
    ));
    for (t, d) in base.distances.iter().enumerate() {
        report.trials().push(vec![0.0, t as f64, *d]);
    }

    if p.bath_scale_factor > 1 {
        let big_cfg = HamiltonianConfig {
            dim: p.bath.dim * p.bath_scale_factor,
            ..p.bath.clone()
        };
        let big_bath = big_cfg.build(&mut ctx.stream("typicality/hamiltonians", 1), BATH)?;
        let scaled = shell_run(ctx, "typicality/scaled", &system, &big_bath, &p.shell, p.samples)?;
        report.add_samples(p.samples);
        let (m0, m1) = (mean(&base.distances), mean(&scaled.distances));
        report.stat("scaled_beta", scaled.beta);
        report.stat("scaled_shell_dim", scaled.shell_dim as f64);
        report.stat("scaled_mean_distance", m1);
        report.stat("scaled_microcanonical_distance", scaled.microcanonical_distance);
        report.check(Check::strictly_below(
            "mean_distance_shrinks_with_bath",
            m1,
            m0,
            "distance must decrease as the shell grows",
        ));
        for (t, d) in scaled.distances.iter().enumerate() {
            report.trials().push(vec![1.0, t as f64, *d]);
        }
    }

    if p.control {
        // full window: the shell vector is uniform on the whole sphere and
        // the microcanonical reference is I/d_S
        let comp = build_composite(&system, &bath)?;
        let window = ShellConfig {
            placement: super::ShellPlacement::Absolute,
            energy: comp.min_energy(),
            delta: comp.max_energy() - comp.min_energy() + 1.0,
            min_shell_dim: 1,
        };
        let shell = window.resolve(&comp)?;
        let reference = DensityMatrix::maximally_mixed(system.space().clone());
        let via_shell = ctx.trials("typicality/control_shell", p.samples, |_, s| {
            let psi = sample_shell_state(s, &comp, &shell)?;
            trace_distance(&psi.reduced_density(&[BATH])?, &reference)
        })?;
        let via_sphere = ctx.trials("typicality/control_sphere", p.samples, |_, s| {
            let psi = sample_uniform_sphere(s, comp.dim()).with_space(comp.space().clone())?;
            trace_distance(&psi.reduced_density(&[BATH])?, &reference)
        })?;
        report.add_samples(2 * p.samples);
        report.stat("control_mean_distance_shell", mean(&via_shell));
        report.stat("control_mean_distance_sphere", mean(&via_sphere));
        let r = ks_two_sample(&via_shell, &via_sphere)?;
        report.check(Check::test("control_full_shell_vs_sphere", r, p.alpha, "single test at level alpha"));
        for (t, d) in via_shell.iter().enumerate() {
            report.trials().push(vec![2.0, t as f64, *d]);
        }
        for (t, d) in via_sphere.iter().enumerate() {
            report.trials().push(vec![3.0, t as f64, *d]);
        }
    }
    Ok(report.finish())
}
