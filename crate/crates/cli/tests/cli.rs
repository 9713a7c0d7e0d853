use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL_COVARIANCE: &str = r#"
experiment = "unitary_covariance"
seed = 11

[params]
samples = 2000
"#;

fn gaplab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaplab"))
        .args(args)
        .current_dir(dir)
        .env_remove("GAPLAB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn run_writes_three_files_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_COVARIANCE);
    let out = gaplab(&["run", &cfg, "--out-dir", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["unitary_covariance_report.json", "unitary_covariance_trials.csv", "unitary_covariance_summary.txt"] {
        assert!(tmp.path().join("o").join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(tmp.path().join("o/unitary_covariance_trials.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains(','));
    let summary = fs::read_to_string(tmp.path().join("o/unitary_covariance_summary.txt")).unwrap();
    assert!(summary.contains("wall time"));
    assert!(summary.contains("PASS"));
}

#[test]
fn reports_are_byte_identical_across_reruns_and_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_COVARIANCE);
    let mut reports = Vec::new();
    for (dir, par) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let out = gaplab(&["run", &cfg, "--out-dir", dir, "--parallelism", par], tmp.path());
        assert_eq!(out.status.code(), Some(0));
        reports.push(fs::read(tmp.path().join(dir).join("unitary_covariance_report.json")).unwrap());
        reports.push(fs::read(tmp.path().join(dir).join("unitary_covariance_trials.csv")).unwrap());
    }
    assert_eq!(reports[0], reports[2]);
    assert_eq!(reports[0], reports[4]);
    assert_eq!(reports[1], reports[3]);
    assert_eq!(reports[1], reports[5]);
}

#[test]
fn seed_flag_changes_the_draws() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_COVARIANCE);
    gaplab(&["run", &cfg, "--out-dir", "a"], tmp.path());
    gaplab(&["run", &cfg, "--out-dir", "b", "--seed", "12"], tmp.path());
    let a = fs::read_to_string(tmp.path().join("a/unitary_covariance_report.json")).unwrap();
    let b = fs::read_to_string(tmp.path().join("b/unitary_covariance_report.json")).unwrap();
    assert_ne!(a, b);
    assert!(b.contains("\"seed\": 12"));
}

#[test]
fn out_dir_comes_from_env_then_config() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL_COVARIANCE.replacen("seed = 11", "seed = 11\nout_dir = \"from_config\"", 1);
    let cfg = write(tmp.path(), "c.toml", &text);

    let out = gaplab(&["run", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("from_config/unitary_covariance_report.json").is_file());

    let out = Command::new(env!("CARGO_BIN_EXE_gaplab"))
        .args(["run", &cfg])
        .current_dir(tmp.path())
        .env("GAPLAB_OUT_DIR", "from_env")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("from_env/unitary_covariance_report.json").is_file());
}

#[test]
fn validate_prints_a_config_that_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", "experiment = \"gap_distribution\"\n[params.bath]\ndim = 300\n");
    let out = gaplab(&["validate", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let canonical = String::from_utf8(out.stdout).unwrap();
    assert!(canonical.contains("dim = 300"));
    let again = write(tmp.path(), "d.toml", &canonical);
    let out = gaplab(&["validate", &again], tmp.path());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), canonical);
}

#[test]
fn bad_configs_exit_two_and_name_the_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let zero = write(
        tmp.path(),
        "zero.toml",
        "experiment = \"conditional_dm_concentration\"\n[params.system]\ndim = 0\n",
    );
    let out = gaplab(&["validate", &zero], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.system.dim"));

    let unknown = write(tmp.path(), "unknown.toml", "experiment = \"nonexistent\"\n");
    let out = gaplab(&["run", &unknown], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nonexistent") && err.contains("gap_distribution"), "{err}");

    let typo = write(tmp.path(), "typo.toml", "experiment = \"unitary_covariance\"\n[params]\nsampels = 3\n");
    let out = gaplab(&["run", &typo], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sampels") && err.contains("line 3"), "{err}");

    let out = gaplab(&["run", "missing.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    let good = write(tmp.path(), "good.toml", SMALL_COVARIANCE);
    let out = gaplab(&["run", &good, "--parallelism", "0"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parallelism"));
}

#[test]
fn failing_checks_exit_one() {
    // no reduced state gets within 1e-6 of the canonical one
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.toml",
        "experiment = \"canonical_typicality\"\n[params]\nsamples = 20\nthreshold = 1e-6\nbath_scale_factor = 1\ncontrol = false\n",
    );
    let out = gaplab(&["run", &cfg, "--out-dir", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(tmp.path().join("o/canonical_typicality_summary.txt")).unwrap();
    assert!(summary.contains("FAIL fraction_within_threshold"));
}

#[test]
fn list_shows_every_experiment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gaplab(&["list"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "canonical_typicality",
        "gap_distribution",
        "conditional_dm_concentration",
        "gaussian_surrogate_concentration",
        "gap_definition_equivalence",
        "unitary_covariance",
    ] {
        assert!(text.contains(name), "{name}");
    }
    assert!(text.contains("[params"));
}
