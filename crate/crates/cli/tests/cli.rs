use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn measuretherm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_measuretherm"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn summary(dir: &Path) -> String {
    fs::read_to_string(dir.join("summary.txt")).unwrap()
}

#[test]
fn lists_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = measuretherm(&["list-scenarios"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(
        names,
        ["scheme", "decohere", "poisson", "jarzynski", "jarzynski_readings", "regression", "landauer", "full_pipeline"]
    );
}

#[test]
fn default_jarzynski_run_passes_and_writes_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scenario = jarzynski\noutput = result\n");
    let out = measuretherm(&["run", &config], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let result = dir.path().join("result");
    let text = summary(&result);
    let max_error: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("max_error="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(max_error < 1e-10);
    assert!(text.contains("seed=42\n"));
    assert!(text.ends_with("status=pass\n"));
    let manifest = fs::read_to_string(result.join("MANIFEST.sha256")).unwrap();
    for name in ["work_distribution.csv", "sampled_work.csv", "summary.txt"] {
        assert!(manifest.lines().any(|l| l.ends_with(&format!("  {name}"))), "{name} missing");
    }
    let csv = fs::read_to_string(result.join("work_distribution.csv")).unwrap();
    assert!(csv.starts_with("W,p\n"));
    assert!(csv.is_ascii() && !csv.contains('\r'));
}

#[test]
fn seed_and_output_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scenario = scheme\noutput = ignored\n[scheme]\nruns = 500\n");
    let out = measuretherm(&["run", &config, "--seed", "7", "--out", "chosen"], dir.path());
    assert!(out.status.success());
    assert!(!dir.path().join("ignored").exists());
    assert!(summary(&dir.path().join("chosen")).contains("seed=7\n"));
}

#[test]
fn reruns_are_byte_identical_and_seeds_matter() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scenario = poisson\n[poisson]\nmembers = 2000\n");
    for (out, seed) in [("a", "5"), ("b", "5"), ("c", "6")] {
        assert!(measuretherm(&["run", &config, "--seed", seed, "--out", out], dir.path()).status.success());
    }
    let read = |d: &str| fs::read(dir.path().join(d).join("MANIFEST.sha256")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn readings_report_the_work_shift() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scenario = jarzynski_readings\n[jarzynski_readings]\nbeta = 0.5\nreadings = 4,20\n");
    assert!(measuretherm(&["run", &config, "--out", "r"], dir.path()).status.success());
    let text = summary(&dir.path().join("r"));
    assert!(text.contains("\nwork_shift=4.0000000000000000e0\n"));
    assert!(text.contains("\nn_readings=2\n"));
    assert!(text.contains("check.work_shift.status=pass"));
}

#[test]
fn regression_with_a_definite_state_is_solvable() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scenario = regression\n[regression]\ncoefficients = 1:0,0:0\n");
    assert!(measuretherm(&["run", &config, "--out", "r"], dir.path()).status.success());
    assert!(summary(&dir.path().join("r")).contains("\nsolvable=true\n"));
}

#[test]
fn poisson_survival_with_ten_thousand_members() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scenario = poisson\n[poisson]\nmembers = 10000\n");
    assert!(measuretherm(&["run", &config, "--out", "p"], dir.path()).status.success());
    let text = summary(&dir.path().join("p"));
    let survival: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("survival_fraction="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((survival - (-1.0f64).exp()).abs() < 0.03);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scenario = jarzynski\n[jarzynski]\nbeta = -1\n");
    let out = measuretherm(&["run", &config], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("line 3: field `beta`"), "{stderr}");

    let config = write_config(dir.path(), "scenario = landauer\n[landauer]\nblock_ranks = 3,1\n");
    assert_eq!(measuretherm(&["run", &config], dir.path()).status.code(), Some(2));
    assert_eq!(measuretherm(&["run", "missing.cfg"], dir.path()).status.code(), Some(2));
    assert_eq!(measuretherm(&["frobnicate"], dir.path()).status.code(), Some(2));
}

#[test]
fn assertion_failures_exit_with_one_and_name_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "scenario = poisson\n[poisson]\nsurvival_tolerance = 1e-9\n");
    let out = measuretherm(&["run", &config, "--out", "f"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("invariant=survival_at_delta_tau"));
    let record = fs::read_to_string(dir.path().join("f/failure.txt")).unwrap();
    assert!(record.starts_with("status=fail\nscenario=poisson\ninvariant=survival_at_delta_tau\n"));
}

#[test]
fn pipeline_writes_one_directory_per_component() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "scenario = full_pipeline\noutput = all\n[scheme]\nruns = 1000\n[poisson]\nmembers = 2000\n[jarzynski]\ntrials = 100\n",
    );
    let out = measuretherm(&["run", &config], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("all");
    for component in ["scheme", "decohere", "poisson", "jarzynski", "jarzynski_readings", "regression", "landauer", "entropy"] {
        assert!(summary(&root.join(component)).ends_with("status=pass\n"), "{component}");
    }
    let manifest = fs::read_to_string(root.join("MANIFEST.sha256")).unwrap();
    assert!(manifest.contains("  entropy/ledgers.csv\n"));
    assert!(summary(&root).contains("component.entropy.status=pass\n"));
}
