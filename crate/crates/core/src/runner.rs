//! Config files, seeded execution and the files a run leaves behind.
//!
//! A config is TOML with four top-level keys and a `[params]` table whose
//! shape depends on the experiment:
//!
//! ```toml
//! experiment = "canonical_typicality"
//! seed = 7
//! parallelism = 4
//! out_dir = "runs"
//!
//! [params]
//! samples = 200
//!
//! [params.bath]
//! dim = 256
//! ```
//!
//! Unknown keys anywhere are errors. Omitted parameters take the defaults
//! shown by [`list_experiments`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{
    Comparison, ExperimentKind, ExperimentParams, ExperimentReport, RunContext, SCHEMA_VERSION,
};

/// Used when neither the command line, the environment nor the config names
/// an output directory.
pub const DEFAULT_OUT_DIR: &str = "gaplab-out";

/// Environment variable that overrides the config's output directory.
pub const OUT_DIR_ENV: &str = "GAPLAB_OUT_DIR";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub parallelism: usize,
    pub out_dir: Option<PathBuf>,
    pub params: ExperimentParams,
}

impl RunConfig {
    /// Defaults for `kind` with seed 1 and one worker.
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            experiment: kind,
            seed: 1,
            parallelism: 1,
            out_dir: None,
            params: ExperimentParams::defaults(kind),
        }
    }

    pub fn with_params(params: ExperimentParams) -> Self {
        let kind = params.kind();
        Self {
            params,
            ..Self::new(kind)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.kind() != self.experiment {
            return Err(Error::invalid("params", "parameters belong to a different experiment"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::invalid("seed", "must fit a signed 64-bit integer"));
        }
        if self.parallelism == 0 {
            return Err(Error::invalid("parallelism", "must be at least 1"));
        }
        self.params.validate()
    }

    /// Canonical TOML text; parsing it gives back an equal config.
    pub fn to_toml_string(&self) -> String {
        let mut t = toml::Table::new();
        t.insert("experiment".into(), self.experiment.name().into());
        t.insert("seed".into(), toml::Value::Integer(self.seed as i64));
        t.insert("parallelism".into(), toml::Value::Integer(self.parallelism as i64));
        if let Some(d) = &self.out_dir {
            t.insert("out_dir".into(), d.display().to_string().into());
        }
        t.insert("params".into(), toml::Value::Table(self.params.to_toml()));
        toml::to_string(&t).expect("config tables serialize")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document<P> {
    #[serde(rename = "experiment")]
    _experiment: serde::de::IgnoredAny,
    #[serde(default = "one")]
    seed: u64,
    #[serde(default = "one_usize")]
    parallelism: usize,
    #[serde(default)]
    out_dir: Option<PathBuf>,
    #[serde(default)]
    params: P,
}

fn one() -> u64 {
    1
}

fn one_usize() -> usize {
    1
}

fn parse_as<P: DeserializeOwned + Default>(text: &str) -> Result<Document<P>> {
    toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string().trim_end().to_string()))
}

/// Parses and validates config text. Syntax and unknown-key errors carry
/// line and column; range errors name the offending key.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string().trim_end().to_string()))?;
    let name = match table.get("experiment") {
        Some(toml::Value::String(s)) => s.clone(),
        Some(_) => return Err(Error::invalid("experiment", "must be a string")),
        None => return Err(Error::invalid("experiment", "missing")),
    };
    let kind = ExperimentKind::from_name(&name)?;
    macro_rules! typed {
        ($variant:ident) => {{
            let d = parse_as(text)?;
            (d.seed, d.parallelism, d.out_dir, ExperimentParams::$variant(d.params))
        }};
    }
    let (seed, parallelism, out_dir, params) = match kind {
        ExperimentKind::CanonicalTypicality => typed!(CanonicalTypicality),
        ExperimentKind::GapDistribution => typed!(GapDistribution),
        ExperimentKind::ConditionalDmConcentration => typed!(ConditionalDmConcentration),
        ExperimentKind::GaussianSurrogateConcentration => typed!(GaussianSurrogateConcentration),
        ExperimentKind::GapDefinitionEquivalence => typed!(GapDefinitionEquivalence),
        ExperimentKind::UnitaryCovariance => typed!(UnitaryCovariance),
    };
    let config = RunConfig {
        experiment: kind,
        seed,
        parallelism,
        out_dir,
        params,
    };
    config.validate()?;
    Ok(config)
}

pub fn parse_config_file(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_config(&text).map_err(|e| match e {
        Error::ConfigParse(msg) => Error::ConfigParse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// A finished run and where its files went.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub wall_time: Duration,
    pub report_path: PathBuf,
    pub trials_path: PathBuf,
    pub summary_path: PathBuf,
}

/// The output directory: `override_dir`, else the config's, else
/// [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(config: &RunConfig, override_dir: Option<&Path>) -> PathBuf {
    override_dir
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Runs the experiment without touching the file system.
pub fn execute(config: &RunConfig) -> Result<(ExperimentReport, Duration)> {
    config.validate()?;
    let ctx = RunContext::new(config.seed, config.parallelism)?;
    let start = Instant::now();
    let report = config.params.run(&ctx)?;
    Ok((report, start.elapsed()))
}

/// Runs the experiment and writes `<name>_report.json`, `<name>_trials.csv`
/// and `<name>_summary.txt` into `out_dir`.
pub fn run(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    let (report, wall_time) = execute(config)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let name = config.experiment.name();
    let report_path = out_dir.join(format!("{name}_report.json"));
    let trials_path = out_dir.join(format!("{name}_trials.csv"));
    let summary_path = out_dir.join(format!("{name}_summary.txt"));

    let json = report_json(&report)?;
    fs::write(&report_path, json).map_err(|e| Error::io(format!("writing {}", report_path.display()), e))?;
    write_trials(&report, &trials_path)?;
    fs::write(&summary_path, summary(&report, Some(wall_time)))
        .map_err(|e| Error::io(format!("writing {}", summary_path.display()), e))?;
    Ok(RunOutcome {
        report,
        wall_time,
        report_path,
        trials_path,
        summary_path,
    })
}

/// The report file contents. Contains no timing, so equal runs give equal
/// bytes.
pub fn report_json(report: &ExperimentReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

fn write_trials(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&report.trials.columns)?;
    for row in &report.trials.rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn comparison_text(c: Comparison) -> &'static str {
    match c {
        Comparison::AbsoluteWithin => "|stat - pred| <= tol",
        Comparison::RelativeWithin => "|stat/pred - 1| <= tol",
        Comparison::AtMost => "stat <= pred + tol",
        Comparison::AtLeast => "stat >= pred - tol",
        Comparison::StrictlyBelow => "stat < pred",
        Comparison::PValueAtLeast => "p >= tol",
    }
}

/// Human-readable summary of a report.
pub fn summary(report: &ExperimentReport, wall_time: Option<Duration>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment: {}", report.experiment);
    let _ = writeln!(s, "claim: {}", report.claim);
    let _ = writeln!(s, "seed: {}", report.seed);
    let _ = writeln!(s, "samples: {}", report.sample_count);
    if let Some(t) = wall_time {
        let _ = writeln!(s, "wall time: {:.3} s", t.as_secs_f64());
    }
    let _ = writeln!(s, "verdict: {}", if report.passed { "PASS" } else { "FAIL" });
    let _ = writeln!(s, "\nchecks:");
    for c in &report.checks {
        let p = c.p_value.map(|p| format!(" p={p:.4e}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "  {} {}: stat={:.6e} pred={:.6e} tol={:.3e}{} [{}] ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.statistic,
            c.prediction,
            c.tolerance,
            p,
            comparison_text(c.comparison),
            c.tolerance_source
        );
    }
    let _ = writeln!(s, "\nstatistics:");
    for (k, v) in &report.statistics {
        let _ = writeln!(s, "  {k} = {v:.6e}");
    }
    if !report.predictions.is_empty() {
        let _ = writeln!(s, "\npredictions:");
        for (k, v) in &report.predictions {
            let _ = writeln!(s, "  {k} = {v:.6e}");
        }
    }
    if !report.non_finite.is_empty() {
        let _ = writeln!(s, "\nnon-finite values dropped: {}", report.non_finite.join(", "));
    }
    s
}

/// One registry entry.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentInfo {
    pub name: &'static str,
    /// The property the experiment tests.
    pub claim: &'static str,
    /// Default `[params]` table; every key may be overridden.
    pub default_params: toml::Table,
}

pub fn list_experiments() -> Vec<ExperimentInfo> {
    ExperimentKind::ALL
        .into_iter()
        .map(|k| ExperimentInfo {
            name: k.name(),
            claim: k.claim(),
            default_params: ExperimentParams::defaults(k).to_toml(),
        })
        .collect()
}

/// Parses a report file and checks it against the current schema.
pub fn validate_report_json(text: &str) -> Result<ExperimentReport> {
    let report: ExperimentReport = serde_json::from_str(text)?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(Error::invalid(
            "schema_version",
            format!("expected {SCHEMA_VERSION}, found {}", report.schema_version),
        ));
    }
    ExperimentKind::from_name(&report.experiment)?;
    for (i, c) in report.checks.iter().enumerate() {
        if c.name.is_empty() || c.tolerance_source.is_empty() {
            return Err(Error::invalid(format!("checks[{i}]"), "needs a name and a tolerance source"));
        }
        if c.comparison == Comparison::PValueAtLeast && c.p_value.is_none() {
            return Err(Error::invalid(format!("checks[{i}].p_value"), "missing for a hypothesis test"));
        }
    }
    let all = !report.checks.is_empty() && report.checks.iter().all(|c| c.passed);
    if all != report.passed {
        return Err(Error::invalid("passed", "disagrees with the individual checks"));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{HamiltonianConfig, TypicalityParams};

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse_config("experiment = \"unitary_covariance\"").unwrap();
        assert_eq!(c, RunConfig::new(ExperimentKind::UnitaryCovariance));
    }

    #[test]
    fn zero_dimension_names_the_key() {
        let text = "experiment = \"canonical_typicality\"\n[params.system]\ndim = 0\n";
        match parse_config(text) {
            Err(Error::ConfigValidation { key, .. }) => assert_eq!(key, "params.system.dim"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_errors_with_line_info() {
        let text = "experiment = \"gap_distribution\"\n\n[params]\nsamples = 10\nbogus = 1\n";
        match parse_config(text) {
            Err(Error::ConfigParse(msg)) => {
                assert!(msg.contains("line 5"), "{msg}");
                assert!(msg.contains("bogus"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config("experiment = \"gap_distribution\"\ncolour = 1"),
            Err(Error::ConfigParse(_))
        ));
        assert!(matches!(parse_config("experiment = [1"), Err(Error::ConfigParse(m)) if m.contains("line 1")));
    }

    #[test]
    fn unknown_experiment_lists_the_registry() {
        match parse_config("experiment = \"nope\"") {
            Err(Error::UnknownExperiment { available, .. }) => {
                for k in ExperimentKind::ALL {
                    assert!(available.contains(k.name()));
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn canonical_form_round_trips() {
        for k in ExperimentKind::ALL {
            let mut c = RunConfig::new(k);
            c.seed = 99;
            c.parallelism = 3;
            c.out_dir = Some(PathBuf::from("somewhere/else"));
            let text = c.to_toml_string();
            assert_eq!(parse_config(&text).unwrap(), c, "{text}");
        }
        let tweaked = RunConfig::with_params(ExperimentParams::CanonicalTypicality(TypicalityParams {
            bath: HamiltonianConfig::equal_spaced(300, 0.37),
            threshold: 0.123456789,
            ..Default::default()
        }));
        assert_eq!(parse_config(&tweaked.to_toml_string()).unwrap(), tweaked);
    }

    #[test]
    fn registry_lists_six_with_claims() {
        let l = list_experiments();
        assert_eq!(l.len(), 6);
        assert!(l.iter().all(|e| !e.claim.is_empty() && !e.default_params.is_empty()));
    }

    #[test]
    fn out_dir_precedence() {
        let mut c = RunConfig::new(ExperimentKind::UnitaryCovariance);
        assert_eq!(resolve_out_dir(&c, None), PathBuf::from(DEFAULT_OUT_DIR));
        c.out_dir = Some("cfg".into());
        assert_eq!(resolve_out_dir(&c, None), PathBuf::from("cfg"));
        assert_eq!(resolve_out_dir(&c, Some(Path::new("flag"))), PathBuf::from("flag"));
    }

    #[test]
    fn run_writes_files_that_validate() {
        let dir = tempfile::tempdir().unwrap();
        let text = "experiment = \"unitary_covariance\"\nseed = 4\n[params]\nsamples = 500\n";
        let config = parse_config(text).unwrap();
        let out = run(&config, dir.path()).unwrap();
        let json = fs::read_to_string(&out.report_path).unwrap();
        let back = validate_report_json(&json).unwrap();
        assert_eq!(back.statistics, out.report.statistics);
        assert_eq!(back.passed, out.report.passed);
        assert!(!json.contains("wall"));

        let rows = fs::read_to_string(&out.trials_path).unwrap().lines().count();
        assert_eq!(rows, out.report.trials.rows.len() + 1);
        assert!(fs::read_to_string(&out.summary_path).unwrap().contains("wall time"));

        let tamper = |key: &str, value: serde_json::Value| {
            let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
            v[key] = value;
            match validate_report_json(&v.to_string()) {
                Err(Error::ConfigValidation { key, .. }) => key,
                other => panic!("{other:?}"),
            }
        };
        assert_eq!(tamper("passed", (!out.report.passed).into()), "passed");
        assert_eq!(tamper("schema_version", 0.into()), "schema_version");
        assert!(matches!(
            validate_report_json(&json.replacen("unitary_covariance", "mystery", 1)),
            Err(Error::UnknownExperiment { .. })
        ));
    }
}
