use serde::{Deserialize, Serialize};

use super::{
    estimate_density_matrix, overlap, probe_panel, require, Check, DensitySpec, ExperimentKind, ExperimentReport,
    ReportBuilder, RunContext, TrialTable,
};
use crate::ensembles::{draw_gap, GapDraw, GapMethod, PreparedDensity, MIN_ORACLE_CAP};
use crate::error::Result;
use crate::hilbert::{trace_distance, StateVector};
use crate::stats::{bonferroni, ks_one_sample, ks_two_sample, mean};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceParams {
    pub densities: Vec<DensitySpec>,
    /// Draws per method for the distribution tests.
    pub samples: usize,
    /// Draws per exact method for the covariance check.
    pub covariance_samples: usize,
    pub probes: usize,
    /// Family-wise level; split over every test in the run.
    pub alpha: f64,
    pub oracle_cap: f64,
}

impl Default for EquivalenceParams {
    fn default() -> Self {
        Self {
            densities: vec![
                DensitySpec::MaximallyMixed { dim: 4 },
                DensitySpec::Diagonal { weights: vec![0.9, 0.1] },
                DensitySpec::Random { dim: 4, rank: 3, seed: 0 },
            ],
            samples: 10_000,
            covariance_samples: 100_000,
            probes: 5,
            alpha: 0.01,
            oracle_cap: 50.0,
        }
    }
}

impl EquivalenceParams {
    pub(crate) fn validate(&self) -> Result<()> {
        require(!self.densities.is_empty(), "densities", "must list at least one density matrix")?;
        for (i, d) in self.densities.iter().enumerate() {
            d.validate(&format!("densities[{i}]"))?;
        }
        require(self.samples >= 1, "samples", "must be at least 1")?;
        require(self.covariance_samples >= 1, "covariance_samples", "must be at least 1")?;
        require(self.probes >= 1, "probes", "must be at least 1")?;
        require(self.alpha > 0.0 && self.alpha < 1.0, "alpha", "must lie in (0, 1)")?;
        require(self.oracle_cap >= MIN_ORACLE_CAP, "oracle_cap", "must be at least 50")
    }

    fn test_count(&self) -> usize {
        self.densities
            .iter()
            .map(|d| {
                let sphere = if d.is_maximally_mixed() && d.dim() >= 2 { 4 } else { 0 };
                6 * self.probes + 2 + sphere
            })
            .sum()
    }
}

const EXACT: [GapMethod; 3] = [GapMethod::GapDef1, GapMethod::DapDef2, GapMethod::PurificationDef3];

/// Pairs whose pre-projection squared norms share a law: GA(ρ) for the first,
/// DA(ρ) for the second.
const NORM_PAIRS: [(GapMethod, GapMethod); 2] = [
    (GapMethod::GapDef1, GapMethod::RejectionOracle),
    (GapMethod::DapDef2, GapMethod::PurificationDef3),
];

pub(super) fn run(p: &EquivalenceParams, ctx: &RunContext) -> Result<ExperimentReport> {
    let kind = ExperimentKind::GapDefinitionEquivalence;
    let mut report = ReportBuilder::new(
        kind,
        ctx.seed(),
        serde_json::to_value(p)?,
        TrialTable::new(&["density", "method", "trial", "raw_norm", "probe0"]),
    );
    let level = bonferroni(p.alpha, p.test_count());
    report.stat("test_level", level);
    let ks_source = format!("family level {} split over {} tests", p.alpha, p.test_count());
    let cov_tol = 3.0 / (p.covariance_samples as f64).sqrt();

    for (i, spec) in p.densities.iter().enumerate() {
        let tag = format!("rho{i}:{}", spec.tag());
        let rho = spec.build("sys")?;
        let prep = PreparedDensity::new(&rho);
        let cap = p.oracle_cap;

        for m in EXACT {
            let channel = format!("equivalence/covariance/{i}/{}", m.name());
            let states: Vec<StateVector> = ctx.trials(&channel, p.covariance_samples, |_, s| {
                draw_gap(s, &prep, m, cap).map(|d| d.state)
            })?;
            report.add_samples(states.len());
            let td = trace_distance(&estimate_density_matrix(&states)?, &rho)?;
            report.stat(format!("covariance_distance[{tag}][{}]", m.name()), td);
            report.check(Check::at_most(
                format!("covariance[{tag}][{}]", m.name()),
                td,
                0.0,
                cov_tol,
                "Monte Carlo scale 3/sqrt(N)",
            ));
        }

        let probes = probe_panel(rho.dim(), p.probes);
        let mut draws: Vec<Vec<GapDraw>> = Vec::new();
        for m in GapMethod::ALL {
            let channel = format!("equivalence/ks/{i}/{}", m.name());
            let batch = ctx.trials(&channel, p.samples, |_, s| draw_gap(s, &prep, m, cap))?;
            report.add_samples(batch.len());
            for (t, d) in batch.iter().enumerate() {
                report.trials().push(vec![
                    i as f64,
                    m as usize as f64,
                    t as f64,
                    d.raw_norm,
                    overlap(&probes[0], d.state.amplitudes()),
                ]);
            }
            if m == GapMethod::RejectionOracle {
                let props: Vec<f64> = batch.iter().map(|d| d.proposals as f64).collect();
                report.stat(format!("oracle_mean_proposals[{tag}]"), mean(&props));
            }
            draws.push(batch);
        }

        let marginals: Vec<Vec<Vec<f64>>> = draws
            .iter()
            .map(|batch| {
                probes
                    .iter()
                    .map(|ph| batch.iter().map(|d| overlap(ph, d.state.amplitudes())).collect())
                    .collect()
            })
            .collect();
        for a in 0..4 {
            for b in a + 1..4 {
                let pair = format!("{}~{}", GapMethod::ALL[a].name(), GapMethod::ALL[b].name());
                for k in 0..p.probes {
                    let r = ks_two_sample(&marginals[a][k], &marginals[b][k])?;
                    report.check(Check::test(format!("ks[{tag}][{pair}][probe{k}]"), r, level, ks_source.clone()));
                }
            }
        }

        let norms = |m: GapMethod| -> Vec<f64> { draws[m as usize].iter().map(|d| d.raw_norm).collect() };
        for (a, b) in NORM_PAIRS {
            let r = ks_two_sample(&norms(a), &norms(b))?;
            report.check(Check::test(
                format!("norm_ks[{tag}][{}~{}]", a.name(), b.name()),
                r,
                level,
                ks_source.clone(),
            ));
        }

        // uniform measure: |ψ_0|² is Beta(1, d−1)
        let d = rho.dim();
        if spec.is_maximally_mixed() && d >= 2 {
            let cdf = |x: f64| 1.0 - (1.0 - x.clamp(0.0, 1.0)).powi(d as i32 - 1);
            for m in GapMethod::ALL {
                let x: Vec<f64> = draws[m as usize].iter().map(|g| g.state.amplitudes()[0].norm_sqr()).collect();
                let r = ks_one_sample(&x, cdf)?;
                report.check(Check::test(format!("sphere[{tag}][{}]", m.name()), r, level, ks_source.clone()));
            }
        }
    }
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EquivalenceParams {
        EquivalenceParams {
            samples: 2000,
            covariance_samples: 4000,
            ..Default::default()
        }
    }

    #[test]
    fn default_run_accepts_everywhere() {
        let r = run(&small(), &RunContext::new(1, 2).unwrap()).unwrap();
        let bad: Vec<_> = r.failed_checks().map(|c| c.name.clone()).collect();
        assert!(bad.is_empty(), "{bad:?}");
        assert_eq!(r.checks.len(), 9 + 3 * 32 + 4);
        assert_eq!(r.trials.rows.len(), 3 * 4 * 2000);
    }

    #[test]
    fn detects_a_wrong_density() {
        // a sampler fed the wrong ρ must be caught by the covariance check
        let p = small();
        let rho = DensitySpec::Diagonal { weights: vec![0.9, 0.1] }.build("sys").unwrap();
        let wrong = PreparedDensity::new(&DensitySpec::Diagonal { weights: vec![0.8, 0.2] }.build("sys").unwrap());
        let ctx = RunContext::new(3, 1).unwrap();
        let states = ctx
            .trials("x", p.covariance_samples, |_, s| draw_gap(s, &wrong, GapMethod::GapDef1, 50.0).map(|d| d.state))
            .unwrap();
        let td = trace_distance(&estimate_density_matrix(&states).unwrap(), &rho).unwrap();
        assert!(td > 3.0 / (p.covariance_samples as f64).sqrt());
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut p = small();
        p.oracle_cap = 10.0;
        assert!(p.validate().is_err());
        p = small();
        p.densities.clear();
        assert!(p.validate().is_err());
    }
}
