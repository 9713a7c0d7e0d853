use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    estimate_density_matrix, overlap, probe_panel, require, Check, DensitySpec, ExperimentKind, ExperimentReport,
    ReportBuilder, RunContext, TrialTable,
};
use crate::ensembles::{sample_haar_unitary, PreparedDensity};
use crate::error::Result;
use crate::hilbert::{trace_distance, DensityMatrix, StateVector};
use crate::stats::{bonferroni, ks_two_sample};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnitaryCovarianceParams {
    /// Density matrix for the identity and Haar cases.
    pub rho: DensitySpec,
    /// Diagonal weights for the permutation case.
    pub permutation_weights: Vec<f64>,
    pub samples: usize,
    pub probes: usize,
    pub alpha: f64,
}

impl Default for UnitaryCovarianceParams {
    fn default() -> Self {
        Self {
            rho: DensitySpec::Random { dim: 4, rank: 3, seed: 1 },
            permutation_weights: vec![0.5, 0.3, 0.15, 0.05],
            samples: 10_000,
            probes: 5,
            alpha: 0.01,
        }
    }
}

impl UnitaryCovarianceParams {
    pub(crate) fn validate(&self) -> Result<()> {
        self.rho.validate("rho")?;
        DensitySpec::Diagonal {
            weights: self.permutation_weights.clone(),
        }
        .validate("permutation_weights")?;
        require(self.samples >= 1, "samples", "must be at least 1")?;
        require(self.probes >= 1, "probes", "must be at least 1")?;
        require(self.alpha > 0.0 && self.alpha < 1.0, "alpha", "must lie in (0, 1)")
    }
}

/// Cyclic shift `e_k ↦ e_{k+1 mod d}`.
fn cyclic_shift(d: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(d, d, |r, c| {
        if r == (c + 1) % d {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

struct Case {
    name: &'static str,
    rho: DensityMatrix,
    u: DMatrix<Complex64>,
}

pub(super) fn run(p: &UnitaryCovarianceParams, ctx: &RunContext) -> Result<ExperimentReport> {
    let mut report = ReportBuilder::new(
        ExperimentKind::UnitaryCovariance,
        ctx.seed(),
        serde_json::to_value(p)?,
        TrialTable::new(&["case", "trial", "pushed_probe0", "direct_probe0"]),
    );
    let rho = p.rho.build("sys")?;
    let diag = DensitySpec::Diagonal {
        weights: p.permutation_weights.clone(),
    }
    .build("sys")?;
    let d_perm = diag.dim();
    let haar_u = sample_haar_unitary(&mut ctx.stream("unitary/haar_u", 0), rho.dim());
    let cases = [
        Case {
            name: "identity",
            rho: rho.clone(),
            u: DMatrix::identity(rho.dim(), rho.dim()),
        },
        Case {
            name: "permutation",
            rho: diag.clone(),
            u: cyclic_shift(d_perm),
        },
        Case {
            name: "haar",
            rho: rho.clone(),
            u: haar_u,
        },
    ];
    let tests = cases.len() * p.probes + d_perm;
    let level = bonferroni(p.alpha, tests);
    let source = format!("family level {} split over {tests} tests", p.alpha);
    let cov_tol = 3.0 / (p.samples as f64).sqrt();

    for (ci, case) in cases.iter().enumerate() {
        let rotated = case.rho.conjugate_by(&case.u)?;
        let prep = PreparedDensity::new(&case.rho);
        let prep_rot = PreparedDensity::new(&rotated);
        let pushed_channel = format!("unitary/{}/pushed", case.name);
        let pushed: Vec<StateVector> = ctx.trials(&pushed_channel, p.samples, |_, s| prep.sample_gap(s).apply(&case.u))?;
        let direct: Vec<StateVector> =
            ctx.trials(&format!("unitary/{}/direct", case.name), p.samples, |_, s| Ok(prep_rot.sample_gap(s)))?;
        report.add_samples(2 * p.samples);

        let probes = probe_panel(case.rho.dim(), p.probes);
        for (t, (a, b)) in pushed.iter().zip(&direct).enumerate() {
            report.trials().push(vec![
                ci as f64,
                t as f64,
                overlap(&probes[0], a.amplitudes()),
                overlap(&probes[0], b.amplitudes()),
            ]);
        }
        for (k, ph) in probes.iter().enumerate() {
            let x: Vec<f64> = pushed.iter().map(|v| overlap(ph, v.amplitudes())).collect();
            let y: Vec<f64> = direct.iter().map(|v| overlap(ph, v.amplitudes())).collect();
            let r = ks_two_sample(&x, &y)?;
            report.check(Check::test(format!("ks[{}][probe{k}]", case.name), r, level, source.clone()));
        }
        let td = trace_distance(&estimate_density_matrix(&pushed)?, &rotated)?;
        report.stat(format!("covariance_distance[{}]", case.name), td);
        report.check(Check::at_most(
            format!("covariance[{}]", case.name),
            td,
            0.0,
            cov_tol,
            "Monte Carlo scale 3/sqrt(N)",
        ));

        match case.name {
            "identity" => {
                // U = I leaves ρ untouched, so equal streams give equal draws
                let again: Vec<StateVector> = ctx.trials(&pushed_channel, p.samples, |_, s| Ok(prep_rot.sample_gap(s)))?;
                let diff = pushed
                    .iter()
                    .zip(&again)
                    .flat_map(|(a, b)| (a.amplitudes() - b.amplitudes()).iter().map(|z| z.norm()).collect::<Vec<_>>())
                    .fold(0.0, f64::max);
                report.check(Check::at_most("identity[same_stream_difference]", diff, 0.0, 1e-12, "exact identity"));
            }
            "permutation" => {
                let source_draws: Vec<StateVector> =
                    ctx.trials(&pushed_channel, p.samples, |_, s| Ok(prep.sample_gap(s)))?;
                let mut defect = 0.0f64;
                for (orig, moved) in source_draws.iter().zip(&pushed) {
                    for k in 0..d_perm {
                        let a = orig.amplitudes()[k].norm_sqr();
                        let b = moved.amplitudes()[(k + 1) % d_perm].norm_sqr();
                        defect = defect.max((a - b).abs());
                    }
                }
                report.check(Check::at_most(
                    "permutation[coordinate_defect]",
                    defect,
                    0.0,
                    1e-12,
                    "exact permutation of coordinates",
                ));
                for k in 0..d_perm {
                    let x: Vec<f64> = source_draws.iter().map(|v| v.amplitudes()[k].norm_sqr()).collect();
                    let y: Vec<f64> = direct.iter().map(|v| v.amplitudes()[(k + 1) % d_perm].norm_sqr()).collect();
                    let r = ks_two_sample(&x, &y)?;
                    report.check(Check::test(format!("permutation[coordinate{k}]"), r, level, source.clone()));
                }
            }
            _ => {}
        }
    }
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_cases_accept() {
        let p = UnitaryCovarianceParams {
            samples: 3000,
            ..Default::default()
        };
        let r = run(&p, &RunContext::new(5, 2).unwrap()).unwrap();
        let bad: Vec<_> = r.failed_checks().map(|c| c.name.clone()).collect();
        assert!(bad.is_empty(), "{bad:?}");
        assert_eq!(r.check("identity[same_stream_difference]").unwrap().statistic, 0.0);
    }

    #[test]
    fn shift_is_a_permutation() {
        let s = cyclic_shift(3);
        assert_eq!(&s * s.adjoint(), DMatrix::identity(3, 3));
        assert_eq!(s[(1, 0)].re, 1.0);
    }
}
