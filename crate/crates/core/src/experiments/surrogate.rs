use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    expectation, probe_panel, require, Check, ExperimentKind, ExperimentReport, HamiltonianConfig, ReportBuilder,
    RunContext, TrialTable,
};
use crate::error::Result;
use crate::stats::{anderson_darling_normal, bonferroni, mean, variance};
use crate::thermal::{canonical_density_matrix, canonical_weights, variance_ratio_prediction};

/// Conditional density matrix replaced by `tr_s|Φ⟩⟨Φ|` with Gaussian
/// `Φ ~ G(ρ_β^S ⊗ ρ_β^s)`; no shell is involved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateParams {
    pub system: HamiltonianConfig,
    pub s: HamiltonianConfig,
    pub beta: f64,
    pub samples: usize,
    pub probes: usize,
    /// Relative tolerance on variance ratios and on `Var ‖Φ‖²`.
    pub tolerance: f64,
    /// Draws fed to the normality test, per probe.
    pub normality_subsample: usize,
    pub alpha: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            system: HamiltonianConfig::equal_spaced(32, 0.0),
            s: HamiltonianConfig::equal_spaced(256, 0.0),
            beta: 1.0,
            samples: 100_000,
            probes: 5,
            tolerance: 0.1,
            normality_subsample: 1000,
            alpha: 0.01,
        }
    }
}

impl SurrogateParams {
    pub(crate) fn validate(&self) -> Result<()> {
        self.system.validate("system")?;
        self.s.validate("s")?;
        require(self.beta.is_finite(), "beta", "must be finite")?;
        require(self.samples >= 8, "samples", "must be at least 8")?;
        require(self.probes >= 1, "probes", "must be at least 1")?;
        require(self.tolerance > 0.0, "tolerance", "must be positive")?;
        require(
            self.normality_subsample >= 8 && self.normality_subsample <= self.samples,
            "normality_subsample",
            "must lie in 8..=samples",
        )?;
        require(self.alpha > 0.0 && self.alpha < 1.0, "alpha", "must lie in (0, 1)")
    }
}

struct Draw {
    norm_sq: f64,
    /// `⟨φ|tr_s|Φ⟩⟨Φ||φ⟩` per probe.
    raw: Vec<f64>,
}

pub(super) fn run(p: &SurrogateParams, ctx: &RunContext) -> Result<ExperimentReport> {
    let mut report = ReportBuilder::new(
        ExperimentKind::GaussianSurrogateConcentration,
        ctx.seed(),
        serde_json::to_value(p)?,
        TrialTable::new(&["trial", "norm_sq", "probe0_raw", "probe0_normalized"]),
    );
    let mut hs = ctx.stream("surrogate/hamiltonians", 0);
    let h_sys = p.system.build(&mut hs, "S")?;
    let h_s = p.s.build(&mut hs, "s")?;
    let rho_sys = canonical_density_matrix(&h_sys, p.beta)?;
    let a = canonical_weights(&h_sys, p.beta);
    let b = canonical_weights(&h_s, p.beta);
    let pred = variance_ratio_prediction(&h_s, p.beta);
    let purity_sys: f64 = a.iter().map(|x| x * x).sum();
    let purity_s: f64 = b.iter().map(|x| x * x).sum();
    report.predict("var_ratio", pred);
    report.predict("norm_sq.mean", 1.0);
    report.predict("norm_sq.variance", purity_sys * purity_s);

    // Φ is drawn in the product eigenbasis; the s basis drops out of tr_s
    let u = h_sys.eigenbasis().to_dense();
    let probes = probe_panel(h_sys.dim(), p.probes);
    let local: Vec<DVector<Complex64>> = probes.iter().map(|ph| u.ad_mul(ph)).collect();
    let (ds_sys, ds) = (a.len(), b.len());
    let amp: DMatrix<f64> = DMatrix::from_fn(ds_sys, ds, |i, k| (a[i] * b[k]).sqrt());
    let draws = ctx.trials("surrogate/draws", p.samples, |_, st| {
        let m = DMatrix::from_fn(ds_sys, ds, |i, k| st.complex_gaussian_unit() * amp[(i, k)]);
        Ok(Draw {
            norm_sq: m.norm_squared(),
            raw: local.iter().map(|ph| m.ad_mul(ph).norm_squared()).collect(),
        })
    })?;
    report.add_samples(p.samples);
    let n = p.samples as f64;

    for (t, d) in draws.iter().enumerate() {
        report.trials().push(vec![t as f64, d.norm_sq, d.raw[0], d.raw[0] / d.norm_sq]);
    }

    let norms: Vec<f64> = draws.iter().map(|d| d.norm_sq).collect();
    let (nm, nv) = (mean(&norms), variance(&norms));
    report.stat("norm_sq.mean", nm);
    report.stat("norm_sq.variance", nv);
    report.check(Check::absolute(
        "norm_sq.mean",
        nm,
        1.0,
        5.0 * (nv / n).sqrt(),
        "5 standard errors",
    ));
    report.check(Check::relative(
        "norm_sq.variance",
        nv,
        purity_sys * purity_s,
        p.tolerance,
        "relative band fixed in the acceptance target",
    ));

    let level = bonferroni(p.alpha, p.probes);
    let entries = rho_sys.entries();
    for (k, ph) in probes.iter().enumerate() {
        let expected = expectation(ph, entries);
        report.predict(format!("mean[probe{k}]"), expected);
        let raw: Vec<f64> = draws.iter().map(|d| d.raw[k]).collect();
        let normalized: Vec<f64> = draws.iter().map(|d| d.raw[k] / d.norm_sq).collect();

        let (rm, rv) = (mean(&raw), variance(&raw));
        report.stat(format!("raw.mean[probe{k}]"), rm);
        report.stat(format!("raw.var_ratio[probe{k}]"), rv / (rm * rm));
        report.check(Check::absolute(
            format!("raw.mean[probe{k}]"),
            rm,
            expected,
            5.0 * (rv / n).sqrt(),
            "5 standard errors",
        ));
        report.check(Check::relative(
            format!("raw.var_ratio[probe{k}]"),
            rv / (rm * rm),
            pred,
            p.tolerance,
            "relative band fixed in the acceptance target",
        ));

        let (m, v) = (mean(&normalized), variance(&normalized));
        let a2 = expectation(ph, &(entries * entries));
        let kappa = 1.0 - 2.0 * a2 / expected + purity_sys;
        report.stat(format!("mean[probe{k}]"), m);
        report.stat(format!("var_ratio[probe{k}]"), v / (m * m));
        report.predict(format!("var_ratio_normalized[probe{k}]"), kappa * pred);
        report.check(Check::absolute(
            format!("mean[probe{k}]"),
            m,
            expected,
            5.0 * (v / n).sqrt(),
            "5 standard errors",
        ));
        report.check(Check::relative(
            format!("var_ratio[probe{k}]"),
            v / (m * m),
            pred,
            p.tolerance,
            "relative band fixed in the acceptance target",
        ));

        let sub = anderson_darling_normal(&normalized[..p.normality_subsample])?;
        report.check(Check::test(
            format!("normality[probe{k}]"),
            sub,
            level,
            format!("level {} split over {} probes", p.alpha, p.probes),
        ));
        let full = anderson_darling_normal(&normalized)?;
        report.stat(format!("normality_full.statistic[probe{k}]"), full.statistic);
        report.stat(format!("normality_full.p_value[probe{k}]"), full.p_value);
    }
    Ok(report.finish())
}
