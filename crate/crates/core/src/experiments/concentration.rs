use serde::{Deserialize, Serialize};

use super::{
    expectation, probe_panel, require, Check, ExperimentKind, ExperimentReport, HamiltonianConfig, ReportBuilder,
    RunContext, ShellConfig, TrialTable,
};
use crate::conditional::all_conditional_density_matrices;
use crate::ensembles::sample_haar_onb;
use crate::error::Result;
use crate::hilbert::{max_abs_diff, trace_distance};
use crate::stats::{mean, quantile, variance};
use crate::thermal::{
    build_composite, canonical_density_matrix, match_beta, reduced_shell_density, sample_shell_state,
    variance_ratio_prediction,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConcentrationParams {
    pub system: HamiltonianConfig,
    /// The measured part of the bath.
    pub y: HamiltonianConfig,
    /// The part of the bath that is traced out.
    pub s: HamiltonianConfig,
    pub shell: ShellConfig,
    /// Conditional density matrices, one per shell state.
    pub samples: usize,
    pub probes: usize,
    /// Relative tolerance on variance ratios.
    pub tolerance: f64,
    /// Extra `s` dimensions for the scaling checks.
    pub scaling_dims: Vec<usize>,
    pub identity_tolerance: f64,
}

impl Default for ConcentrationParams {
    fn default() -> Self {
        Self {
            system: HamiltonianConfig::equal_spaced(2, 1.0),
            y: HamiltonianConfig::equal_spaced(64, 1.0),
            s: HamiltonianConfig::equal_spaced(64, 1.0),
            shell: ShellConfig::absolute(24.0, 40.0),
            samples: 10_000,
            probes: 5,
            tolerance: 0.3,
            scaling_dims: Vec::new(),
            identity_tolerance: 1e-12,
        }
    }
}

impl ConcentrationParams {
    pub(crate) fn validate(&self) -> Result<()> {
        self.system.validate("system")?;
        self.y.validate("y")?;
        self.s.validate("s")?;
        self.shell.validate("shell")?;
        require(self.samples >= 2, "samples", "must be at least 2")?;
        require(self.probes >= 1, "probes", "must be at least 1")?;
        require(self.tolerance > 0.0, "tolerance", "must be positive")?;
        require(self.identity_tolerance > 0.0, "identity_tolerance", "must be positive")?;
        for (i, d) in self.scaling_dims.iter().enumerate() {
            require(*d >= 1, &format!("scaling_dims[{i}]"), "must be at least 1")?;
        }
        Ok(())
    }

    /// `s` dimensions to run, ascending, including the base one.
    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.scaling_dims.iter().copied().chain([self.s.dim]).collect();
        d.sort_unstable();
        d.dedup();
        d
    }
}

struct Draw {
    probe_values: Vec<f64>,
    distance: f64,
    identity_defect: f64,
    weight: f64,
}

/// Var/Mean² of each probe, with the prediction for it.
struct DimResult {
    ratio_mean: f64,
    prediction: f64,
}

fn run_dim(
    p: &ConcentrationParams,
    ctx: &RunContext,
    dim_s: usize,
    report: &mut ReportBuilder,
) -> Result<DimResult> {
    let tag = format!("dim_s={dim_s}");
    let mut hs = ctx.stream("concentration/hamiltonians", 0);
    let system = p.system.build(&mut hs, "S")?;
    let y = p.y.build(&mut hs, "y")?;
    let s_cfg = HamiltonianConfig { dim: dim_s, ..p.s.clone() };
    let h_s = s_cfg.build(&mut ctx.stream(&format!("concentration/hamiltonians/s{dim_s}"), 0), "s")?;
    let comp = build_composite(&build_composite(&system, &y)?, &h_s)?;
    let shell = p.shell.resolve(&comp)?;
    let beta = match_beta(&comp, shell.midpoint())?;
    let rho_beta = canonical_density_matrix(&system, beta)?;
    let pred = variance_ratio_prediction(&h_s, beta);
    let mc = reduced_shell_density(&comp, &shell, &["y", "s"])?;
    let mc_distance = trace_distance(&mc, &rho_beta)?;
    report.stat(format!("{tag}.beta"), beta);
    report.stat(format!("{tag}.shell_dim"), shell.shell_dim() as f64);
    report.stat(format!("{tag}.microcanonical_distance"), mc_distance);
    report.predict(format!("{tag}.var_ratio"), pred);

    let probes = probe_panel(system.dim(), p.probes);
    let dim_y = y.dim();
    let draws: Vec<Draw> = ctx.trials(&format!("concentration/{tag}"), p.samples, |_, st| {
        let psi = sample_shell_state(st, &comp, &shell)?;
        let onb = sample_haar_onb(st, dim_y).relabeled("y");
        let all = all_conditional_density_matrices(&psi, &onb, "s")?;
        let reduced = psi.reduced_density(&["y", "s"])?;
        let mut avg = nalgebra::DMatrix::zeros(reduced.dim(), reduced.dim());
        for c in &all {
            avg += c.rho.entries() * num_complex::Complex64::new(c.weight, 0.0);
        }
        let identity_defect = max_abs_diff(&avg, reduced.entries());
        let weights: Vec<f64> = all.iter().map(|c| c.weight).collect();
        let pick = &all[st.weighted_index(&weights)];
        Ok(Draw {
            probe_values: probes.iter().map(|ph| expectation(ph, pick.rho.entries())).collect(),
            distance: trace_distance(&pick.rho, &rho_beta)?,
            identity_defect,
            weight: pick.weight,
        })
    })?;
    report.add_samples(p.samples);

    for (t, d) in draws.iter().enumerate() {
        let mut row = vec![dim_s as f64, t as f64, d.weight, d.distance];
        row.extend(&d.probe_values);
        report.trials().push(row);
    }
    let distances: Vec<f64> = draws.iter().map(|d| d.distance).collect();
    report.stat(format!("{tag}.mean_distance"), mean(&distances));
    report.stat(format!("{tag}.q95_distance"), quantile(&distances, 0.95));
    let defect = draws.iter().map(|d| d.identity_defect).fold(0.0, f64::max);
    report.stat(format!("{tag}.identity_defect"), defect);
    report.check(Check::at_most(
        format!("{tag}.identity"),
        defect,
        0.0,
        p.identity_tolerance,
        "exact identity; round-off only",
    ));

    let a = rho_beta.entries();
    let purity_s = rho_beta.purity();
    let mut ratios = Vec::with_capacity(p.probes);
    let n = p.samples as f64;
    for (k, ph) in probes.iter().enumerate() {
        let v: Vec<f64> = draws.iter().map(|d| d.probe_values[k]).collect();
        let (m, var) = (mean(&v), variance(&v));
        let ratio = var / (m * m);
        ratios.push(ratio);
        let expected = expectation(ph, a);
        report.stat(format!("{tag}.mean[probe{k}]"), m);
        report.stat(format!("{tag}.var_ratio[probe{k}]"), ratio);
        report.predict(format!("{tag}.mean[probe{k}]"), expected);
        // first-order effect of the normalization by the conditional weight
        let a2 = expectation(ph, &(a * a));
        let kappa = 1.0 - 2.0 * a2 / expected + purity_s;
        report.predict(format!("{tag}.var_ratio_normalized[probe{k}]"), kappa * pred);
        report.check(Check::absolute(
            format!("{tag}.mean[probe{k}]"),
            m,
            expected,
            5.0 * (var / n).sqrt() + mc_distance,
            "5 standard errors plus the microcanonical-canonical trace distance",
        ));
        report.check(Check::relative(
            format!("{tag}.var_ratio[probe{k}]"),
            ratio,
            pred,
            p.tolerance,
            "relative band frozen from pilot Monte Carlo error",
        ));
    }
    let ratio_mean = mean(&ratios);
    report.stat(format!("{tag}.var_ratio_mean"), ratio_mean);
    Ok(DimResult {
        ratio_mean,
        prediction: pred,
    })
}

pub(super) fn run(p: &ConcentrationParams, ctx: &RunContext) -> Result<ExperimentReport> {
    let mut columns: Vec<String> = ["dim_s", "trial", "outcome_weight", "trace_distance"]
        .iter()
        .map(|c| c.to_string())
        .collect();
    columns.extend((0..p.probes).map(|k| format!("probe{k}")));
    let mut report = ReportBuilder::new(
        ExperimentKind::ConditionalDmConcentration,
        ctx.seed(),
        serde_json::to_value(p)?,
        TrialTable { columns, rows: Vec::new() },
    );
    let dims = p.dims();
    let mut results = Vec::with_capacity(dims.len());
    for &d in &dims {
        results.push(run_dim(p, ctx, d, &mut report)?);
    }
    let mut pairs: Vec<(usize, usize)> = (1..dims.len()).map(|i| (i - 1, i)).collect();
    if dims.len() > 2 {
        pairs.push((0, dims.len() - 1));
    }
    for (i, j) in pairs {
        let (a, b) = (&results[i], &results[j]);
        let name = format!("scaling[{}->{}]", dims[i], dims[j]);
        report.predict(name.clone(), a.prediction / b.prediction);
        report.check(Check::relative(
            name,
            a.ratio_mean / b.ratio_mean,
            a.prediction / b.prediction,
            p.tolerance,
            "relative band frozen from pilot Monte Carlo error",
        ));
    }
    Ok(report.finish())
}
