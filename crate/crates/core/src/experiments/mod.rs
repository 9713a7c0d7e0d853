//! Monte Carlo experiments that turn the structural claims about GAP
//! measures, typicality and conditional density matrices into verdicts.
//!
//! Every experiment is a deterministic function of its parameters and a
//! master seed. Trial `i` of channel `c` draws from the stream
//! `(channel_seed(seed, c), i)`, so results do not depend on scheduling or on
//! the worker count. Every check in a report records the statistic, the
//! prediction it is compared with, the tolerance, and where that tolerance
//! comes from.

mod config;
mod covariance;
mod equivalence;
mod gap_distribution;
mod concentration;
mod surrogate;
mod typicality;

pub use config::{DensitySpec, HamiltonianConfig, ShellConfig, ShellPlacement};
pub use covariance::UnitaryCovarianceParams;
pub use equivalence::EquivalenceParams;
pub use gap_distribution::{BasisSampling, GapDistributionParams, HeredityParams};
pub use concentration::ConcentrationParams;
pub use surrogate::SurrogateParams;
pub use typicality::TypicalityParams;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_uniform_sphere, RandomStream};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, StateVector};
use crate::stats::TestResult;

/// Version of the report layout written by [`ExperimentReport`].
pub const SCHEMA_VERSION: u32 = 1;

/// Seed of the stream the probe vectors are drawn from. Independent of the
/// run seed so every run of an experiment uses the same probes.
pub const PROBE_SEED: u64 = 0x7072_6f62_655f_7631;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|statistic − prediction| ≤ tolerance`
    AbsoluteWithin,
    /// `|statistic/prediction − 1| ≤ tolerance`
    RelativeWithin,
    /// `statistic ≤ prediction + tolerance`
    AtMost,
    /// `statistic ≥ prediction − tolerance`
    AtLeast,
    /// `statistic < prediction`
    StrictlyBelow,
    /// Hypothesis test; passes when `p_value ≥ tolerance` (the level).
    PValueAtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub prediction: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    pub tolerance_source: String,
    pub passed: bool,
}

impl Check {
    fn new(
        name: impl Into<String>,
        statistic: f64,
        prediction: f64,
        tolerance: f64,
        comparison: Comparison,
        source: impl Into<String>,
    ) -> Self {
        let passed = match comparison {
            Comparison::AbsoluteWithin => (statistic - prediction).abs() <= tolerance,
            Comparison::RelativeWithin => (statistic / prediction - 1.0).abs() <= tolerance,
            Comparison::AtMost => statistic <= prediction + tolerance,
            Comparison::AtLeast => statistic >= prediction - tolerance,
            Comparison::StrictlyBelow => statistic < prediction,
            Comparison::PValueAtLeast => false,
        };
        Self {
            name: name.into(),
            statistic,
            prediction,
            tolerance,
            comparison,
            p_value: None,
            tolerance_source: source.into(),
            passed,
        }
    }

    pub fn absolute(name: impl Into<String>, stat: f64, pred: f64, tol: f64, source: impl Into<String>) -> Self {
        Self::new(name, stat, pred, tol, Comparison::AbsoluteWithin, source)
    }

    pub fn relative(name: impl Into<String>, stat: f64, pred: f64, tol: f64, source: impl Into<String>) -> Self {
        Self::new(name, stat, pred, tol, Comparison::RelativeWithin, source)
    }

    pub fn at_most(name: impl Into<String>, stat: f64, pred: f64, tol: f64, source: impl Into<String>) -> Self {
        Self::new(name, stat, pred, tol, Comparison::AtMost, source)
    }

    pub fn at_least(name: impl Into<String>, stat: f64, pred: f64, tol: f64, source: impl Into<String>) -> Self {
        Self::new(name, stat, pred, tol, Comparison::AtLeast, source)
    }

    pub fn strictly_below(name: impl Into<String>, stat: f64, bound: f64, source: impl Into<String>) -> Self {
        Self::new(name, stat, bound, 0.0, Comparison::StrictlyBelow, source)
    }

    /// A two-sample or goodness-of-fit test: the statistic is the test
    /// statistic, the prediction its null value 0, the tolerance the level.
    pub fn test(name: impl Into<String>, result: TestResult, level: f64, source: impl Into<String>) -> Self {
        let mut c = Self::new(name, result.statistic, 0.0, level, Comparison::PValueAtLeast, source);
        c.p_value = Some(result.p_value);
        c.passed = result.p_value >= level;
        c
    }
}

/// Per-trial scalars, written as a delimited table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TrialTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: String,
    pub claim: String,
    pub seed: u64,
    pub sample_count: u64,
    pub config: serde_json::Value,
    pub statistics: BTreeMap<String, f64>,
    pub predictions: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    /// Names of statistics that came out non-finite and were dropped.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub non_finite: Vec<String>,
    pub passed: bool,
    #[serde(skip)]
    pub trials: TrialTable,
}

impl ExperimentReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn checks_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name.starts_with(prefix))
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Accumulates a report while an experiment runs.
pub(crate) struct ReportBuilder {
    report: ExperimentReport,
}

impl ReportBuilder {
    pub(crate) fn new(kind: ExperimentKind, seed: u64, config: serde_json::Value, trials: TrialTable) -> Self {
        Self {
            report: ExperimentReport {
                schema_version: SCHEMA_VERSION,
                experiment: kind.name().to_string(),
                claim: kind.claim().to_string(),
                seed,
                sample_count: 0,
                config,
                statistics: BTreeMap::new(),
                predictions: BTreeMap::new(),
                checks: Vec::new(),
                non_finite: Vec::new(),
                passed: false,
                trials,
            },
        }
    }

    pub(crate) fn stat(&mut self, name: impl Into<String>, value: f64) {
        let name = name.into();
        if value.is_finite() {
            self.report.statistics.insert(name, value);
        } else {
            self.report.non_finite.push(name);
        }
    }

    pub(crate) fn predict(&mut self, name: impl Into<String>, value: f64) {
        let name = name.into();
        if value.is_finite() {
            self.report.predictions.insert(name, value);
        } else {
            self.report.non_finite.push(name);
        }
    }

    pub(crate) fn check(&mut self, c: Check) {
        self.report.checks.push(c);
    }

    pub(crate) fn add_samples(&mut self, n: usize) {
        self.report.sample_count += n as u64;
    }

    pub(crate) fn trials(&mut self) -> &mut TrialTable {
        &mut self.report.trials
    }

    pub(crate) fn finish(mut self) -> ExperimentReport {
        self.report.passed = !self.report.checks.is_empty() && self.report.checks.iter().all(|c| c.passed);
        self.report
    }
}

/// Master seed plus the worker pool trials are scheduled on.
#[derive(Clone)]
pub struct RunContext {
    seed: u64,
    pool: Arc<rayon::ThreadPool>,
}

impl RunContext {
    pub fn new(seed: u64, parallelism: usize) -> Result<Self> {
        if parallelism == 0 {
            return Err(Error::invalid("parallelism", "must be at least 1"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| Error::invalid("parallelism", e.to_string()))?;
        Ok(Self {
            seed,
            pool: Arc::new(pool),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn parallelism(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Stream `index` of a named channel.
    pub fn stream(&self, channel: &str, index: u64) -> RandomStream {
        RandomStream::new(channel_seed(self.seed, channel), index)
    }

    /// Runs `n` independent trials on the pool, collecting results in trial
    /// order. Trial `i` gets stream `i` of `channel`.
    pub fn trials<T, F>(&self, channel: &str, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, &mut RandomStream) -> Result<T> + Sync,
    {
        let base = channel_seed(self.seed, channel);
        self.pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut stream = RandomStream::new(base, i as u64);
                    f(i, &mut stream)
                })
                .collect()
        })
    }
}

/// Seed of a named sub-experiment: FNV-1a of the name mixed into the master
/// seed with a SplitMix64 finalizer.
pub fn channel_seed(seed: u64, channel: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in channel.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `count` fixed unit vectors in `C^dim`, the same for every run.
pub fn probe_panel(dim: usize, count: usize) -> Vec<DVector<Complex64>> {
    let mut s = RandomStream::new(PROBE_SEED, dim as u64);
    (0..count)
        .map(|_| sample_uniform_sphere(&mut s, dim).into_amplitudes())
        .collect()
}

/// `|⟨φ|ψ⟩|²`.
pub(crate) fn overlap(probe: &DVector<Complex64>, psi: &DVector<Complex64>) -> f64 {
    probe.dotc(psi).norm_sqr()
}

/// `⟨φ|ρ|φ⟩`.
pub(crate) fn expectation(probe: &DVector<Complex64>, rho: &DMatrix<Complex64>) -> f64 {
    probe.dotc(&(rho * probe)).re
}

/// Average of `|ψ⟩⟨ψ|` over the samples, hermitized and scaled to unit trace.
pub fn estimate_density_matrix(samples: &[StateVector]) -> Result<DensityMatrix> {
    let first = samples
        .first()
        .ok_or(Error::EmptyInput("no samples to estimate a density matrix from"))?;
    let d = first.dim();
    let mut acc = DMatrix::<Complex64>::zeros(d, d);
    for s in samples {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.dim(),
            });
        }
        let v = s.amplitudes();
        acc.gerc(Complex64::new(1.0, 0.0), v, v, Complex64::new(1.0, 0.0));
    }
    DensityMatrix::from_accumulated(acc.unscale(samples.len() as f64), first.space().clone())
}

/// The six experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CanonicalTypicality,
    GapDistribution,
    ConditionalDmConcentration,
    GaussianSurrogateConcentration,
    GapDefinitionEquivalence,
    UnitaryCovariance,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::CanonicalTypicality,
        ExperimentKind::GapDistribution,
        ExperimentKind::ConditionalDmConcentration,
        ExperimentKind::GaussianSurrogateConcentration,
        ExperimentKind::GapDefinitionEquivalence,
        ExperimentKind::UnitaryCovariance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::CanonicalTypicality => "canonical_typicality",
            ExperimentKind::GapDistribution => "gap_distribution",
            ExperimentKind::ConditionalDmConcentration => "conditional_dm_concentration",
            ExperimentKind::GaussianSurrogateConcentration => "gaussian_surrogate_concentration",
            ExperimentKind::GapDefinitionEquivalence => "gap_definition_equivalence",
            ExperimentKind::UnitaryCovariance => "unitary_covariance",
        }
    }

    /// The property under test.
    pub fn claim(self) -> &'static str {
        match self {
            ExperimentKind::CanonicalTypicality => {
                "canonical typicality: the reduced state of a typical shell vector is close to the canonical density matrix"
            }
            ExperimentKind::GapDistribution => {
                "conditional wave functions of a typical shell vector are GAP distributed at the matched temperature; heredity for product densities"
            }
            ExperimentKind::ConditionalDmConcentration => {
                "conditional density matrices concentrate at the canonical density matrix with relative variance Z(2b)/Z(b)^2"
            }
            ExperimentKind::GaussianSurrogateConcentration => {
                "Gaussian surrogate for the conditional vector: probe mean, variance ratio Z(2b)/Z(b)^2 and approximate normality"
            }
            ExperimentKind::GapDefinitionEquivalence => {
                "the Gaussian-adjust-project, D-adjust-project and purification constructions give one measure whose density matrix is rho"
            }
            ExperimentKind::UnitaryCovariance => "U applied to GAP(rho) samples is distributed as GAP(U rho U^-1)",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::UnknownExperiment {
                name: name.to_string(),
                available: Self::ALL.map(|k| k.name()).join(", "),
            })
    }
}

/// Parameters of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentParams {
    CanonicalTypicality(TypicalityParams),
    GapDistribution(GapDistributionParams),
    ConditionalDmConcentration(ConcentrationParams),
    GaussianSurrogateConcentration(SurrogateParams),
    GapDefinitionEquivalence(EquivalenceParams),
    UnitaryCovariance(UnitaryCovarianceParams),
}

impl ExperimentParams {
    pub fn defaults(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::CanonicalTypicality => Self::CanonicalTypicality(Default::default()),
            ExperimentKind::GapDistribution => Self::GapDistribution(Default::default()),
            ExperimentKind::ConditionalDmConcentration => Self::ConditionalDmConcentration(Default::default()),
            ExperimentKind::GaussianSurrogateConcentration => Self::GaussianSurrogateConcentration(Default::default()),
            ExperimentKind::GapDefinitionEquivalence => Self::GapDefinitionEquivalence(Default::default()),
            ExperimentKind::UnitaryCovariance => Self::UnitaryCovariance(Default::default()),
        }
    }

    pub fn kind(&self) -> ExperimentKind {
        match self {
            Self::CanonicalTypicality(_) => ExperimentKind::CanonicalTypicality,
            Self::GapDistribution(_) => ExperimentKind::GapDistribution,
            Self::ConditionalDmConcentration(_) => ExperimentKind::ConditionalDmConcentration,
            Self::GaussianSurrogateConcentration(_) => ExperimentKind::GaussianSurrogateConcentration,
            Self::GapDefinitionEquivalence(_) => ExperimentKind::GapDefinitionEquivalence,
            Self::UnitaryCovariance(_) => ExperimentKind::UnitaryCovariance,
        }
    }

    pub fn to_toml(&self) -> toml::Table {
        let v = match self {
            Self::CanonicalTypicality(p) => toml::Table::try_from(p),
            Self::GapDistribution(p) => toml::Table::try_from(p),
            Self::ConditionalDmConcentration(p) => toml::Table::try_from(p),
            Self::GaussianSurrogateConcentration(p) => toml::Table::try_from(p),
            Self::GapDefinitionEquivalence(p) => toml::Table::try_from(p),
            Self::UnitaryCovariance(p) => toml::Table::try_from(p),
        };
        v.expect("parameter structs serialize to tables")
    }

    pub fn to_json(&self) -> serde_json::Value {
        let v = match self {
            Self::CanonicalTypicality(p) => serde_json::to_value(p),
            Self::GapDistribution(p) => serde_json::to_value(p),
            Self::ConditionalDmConcentration(p) => serde_json::to_value(p),
            Self::GaussianSurrogateConcentration(p) => serde_json::to_value(p),
            Self::GapDefinitionEquivalence(p) => serde_json::to_value(p),
            Self::UnitaryCovariance(p) => serde_json::to_value(p),
        };
        v.expect("parameter structs serialize to JSON")
    }

    /// Checks ranges; errors name the offending key as `params.<path>`.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::CanonicalTypicality(p) => p.validate(),
            Self::GapDistribution(p) => p.validate(),
            Self::ConditionalDmConcentration(p) => p.validate(),
            Self::GaussianSurrogateConcentration(p) => p.validate(),
            Self::GapDefinitionEquivalence(p) => p.validate(),
            Self::UnitaryCovariance(p) => p.validate(),
        }
    }

    pub fn run(&self, ctx: &RunContext) -> Result<ExperimentReport> {
        self.validate()?;
        match self {
            Self::CanonicalTypicality(p) => typicality::run(p, ctx),
            Self::GapDistribution(p) => gap_distribution::run(p, ctx),
            Self::ConditionalDmConcentration(p) => concentration::run(p, ctx),
            Self::GaussianSurrogateConcentration(p) => surrogate::run(p, ctx),
            Self::GapDefinitionEquivalence(p) => equivalence::run(p, ctx),
            Self::UnitaryCovariance(p) => covariance::run(p, ctx),
        }
    }
}

pub fn run_canonical_typicality(p: &TypicalityParams, ctx: &RunContext) -> Result<ExperimentReport> {
    p.validate()?;
    typicality::run(p, ctx)
}

pub fn run_gap_distribution(p: &GapDistributionParams, ctx: &RunContext) -> Result<ExperimentReport> {
    p.validate()?;
    gap_distribution::run(p, ctx)
}

pub fn run_conditional_dm_concentration(p: &ConcentrationParams, ctx: &RunContext) -> Result<ExperimentReport> {
    p.validate()?;
    concentration::run(p, ctx)
}

pub fn run_gaussian_surrogate_concentration(p: &SurrogateParams, ctx: &RunContext) -> Result<ExperimentReport> {
    p.validate()?;
    surrogate::run(p, ctx)
}

pub fn run_gap_definition_equivalence(p: &EquivalenceParams, ctx: &RunContext) -> Result<ExperimentReport> {
    p.validate()?;
    equivalence::run(p, ctx)
}

pub fn run_unitary_covariance(p: &UnitaryCovarianceParams, ctx: &RunContext) -> Result<ExperimentReport> {
    p.validate()?;
    covariance::run(p, ctx)
}

pub(crate) fn require(cond: bool, key: &str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(format!("params.{key}"), reason))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_gap, RandomStream};
    use crate::hilbert::{trace_distance, SpaceFactorization};

    #[test]
    fn estimate_of_single_sample_is_its_projector() {
        let mut s = RandomStream::new(1, 0);
        let psi = sample_uniform_sphere(&mut s, 3);
        let est = estimate_density_matrix(std::slice::from_ref(&psi)).unwrap();
        assert!(est.max_abs_diff(&psi.projector().unwrap()) < 1e-15);
        assert!(estimate_density_matrix(&[]).is_err());
    }

    #[test]
    fn estimate_rejects_mixed_dimensions() {
        let mut s = RandomStream::new(1, 0);
        let a = sample_uniform_sphere(&mut s, 3);
        let b = sample_uniform_sphere(&mut s, 4);
        assert!(matches!(
            estimate_density_matrix(&[a, b]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sphere_and_gap_estimates_converge() {
        let mut s = RandomStream::new(2, 0);
        let n = 100_000;
        let sphere: Vec<StateVector> = (0..n).map(|_| sample_uniform_sphere(&mut s, 4)).collect();
        let est = estimate_density_matrix(&sphere).unwrap();
        let mixed = DensityMatrix::maximally_mixed(SpaceFactorization::single("sys", 4).unwrap());
        assert!(trace_distance(&est, &mixed).unwrap() < 0.02);
        let rho = DensityMatrix::diagonal(&[0.6, 0.3, 0.1], "sys").unwrap();
        let gap: Vec<StateVector> = (0..n).map(|_| sample_gap(&mut s, &rho)).collect();
        assert!(trace_distance(&estimate_density_matrix(&gap).unwrap(), &rho).unwrap() < 0.02);
    }

    #[test]
    fn trials_are_independent_of_worker_count() {
        let f = |i: usize, s: &mut RandomStream| -> Result<(usize, f64)> { Ok((i, s.uniform())) };
        let one = RunContext::new(9, 1).unwrap().trials("c", 257, f).unwrap();
        let many = RunContext::new(9, 4).unwrap().trials("c", 257, f).unwrap();
        assert_eq!(one, many);
        let other = RunContext::new(9, 1).unwrap().trials("d", 257, f).unwrap();
        assert_ne!(one, other);
    }

    #[test]
    fn channel_seeds_differ() {
        assert_ne!(channel_seed(1, "a"), channel_seed(1, "b"));
        assert_ne!(channel_seed(1, "a"), channel_seed(2, "a"));
        assert_eq!(channel_seed(5, "x"), channel_seed(5, "x"));
    }

    #[test]
    fn probe_panel_is_fixed_and_normalized() {
        let a = probe_panel(3, 5);
        assert_eq!(a, probe_panel(3, 5));
        assert!(a.iter().all(|p| (p.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn check_comparisons() {
        assert!(Check::relative("r", 1.25, 1.0, 0.3, "").passed);
        assert!(!Check::relative("r", 1.35, 1.0, 0.3, "").passed);
        assert!(!Check::relative("r", f64::NAN, 1.0, 0.3, "").passed);
        assert!(Check::at_most("m", 0.04, 0.0, 0.05, "").passed);
        assert!(Check::at_least("l", 0.96, 1.0, 0.05, "").passed);
        assert!(!Check::strictly_below("s", 1.0, 1.0, "").passed);
        let t = TestResult { statistic: 0.1, p_value: 0.005 };
        assert!(!Check::test("t", t, 0.01, "").passed);
    }

    #[test]
    fn experiment_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(ExperimentKind::from_name(k.name()).unwrap(), k);
        }
        match ExperimentKind::from_name("nope") {
            Err(Error::UnknownExperiment { available, .. }) => assert!(available.contains("gap_distribution")),
            other => panic!("{other:?}"),
        }
    }
}
