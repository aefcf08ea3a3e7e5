//! Scenario results and their on-disk form.
//!
//! A report directory holds the scenario's CSV files, a `summary.txt` of
//! `key=value` lines, a `failure.txt` record when a check fails, and a
//! `MANIFEST.sha256` listing every emitted file with its digest. Component
//! reports of a pipeline go to subdirectories named after the component.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::RunError;

pub const SUMMARY_FILE: &str = "summary.txt";
pub const FAILURE_FILE: &str = "failure.txt";
pub const MANIFEST_FILE: &str = "MANIFEST.sha256";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub name: String,
    pub contents: String,
}

impl DataFile {
    pub fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        Self { name: name.into(), contents: contents.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    /// A deviation compared against a tolerance.
    Within { value: f64, tolerance: f64 },
    /// A property that either holds or does not.
    Holds(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Plain statement of the identity or invariant being checked.
    pub identity: &'static str,
    pub verdict: Verdict,
}

impl Check {
    /// Passes when `value <= tolerance`; NaN fails.
    pub fn within(name: impl Into<String>, identity: &'static str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), identity, verdict: Verdict::Within { value, tolerance } }
    }

    pub fn holds(name: impl Into<String>, identity: &'static str, holds: bool) -> Self {
        Self { name: name.into(), identity, verdict: Verdict::Holds(holds) }
    }

    pub fn passed(&self) -> bool {
        match self.verdict {
            Verdict::Within { value, tolerance } => value <= tolerance,
            Verdict::Holds(h) => h,
        }
    }

    fn lines(&self) -> Vec<String> {
        let prefix = format!("check.{}", self.name);
        let mut out = vec![format!("{prefix}.identity={}", self.identity)];
        match self.verdict {
            Verdict::Within { value, tolerance } => {
                out.push(format!("{prefix}.value={}", num(value)));
                out.push(format!("{prefix}.tolerance={}", num(tolerance)));
            }
            Verdict::Holds(h) => out.push(format!("{prefix}.holds={h}")),
        }
        out.push(format!("{prefix}.status={}", status(self.passed())));
        out
    }
}

fn status(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "fail"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub scenario: String,
    pub seed: u64,
    pub values: Vec<(String, String)>,
    pub checks: Vec<Check>,
    pub files: Vec<DataFile>,
    pub children: Vec<ScenarioReport>,
}

impl ScenarioReport {
    pub fn new(scenario: impl Into<String>, seed: u64) -> Self {
        Self {
            scenario: scenario.into(),
            seed,
            values: Vec::new(),
            checks: Vec::new(),
            files: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn value(&mut self, key: impl Into<String>, value: impl ToString) {
        self.values.push((key.into(), value.to_string()));
    }

    pub fn real(&mut self, key: impl Into<String>, value: f64) {
        self.value(key, num(value));
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn file(&mut self, name: impl Into<String>, contents: impl Into<String>) {
        self.files.push(DataFile::new(name, contents));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed) && self.children.iter().all(ScenarioReport::passed)
    }

    /// Path-qualified name of the first failing check, e.g. `poisson/trace_preserved`.
    pub fn first_failure(&self) -> Option<(String, &Check)> {
        if let Some(check) = self.checks.iter().find(|c| !c.passed()) {
            return Some((check.name.clone(), check));
        }
        self.children
            .iter()
            .find_map(|child| child.first_failure().map(|(name, c)| (format!("{}/{name}", child.scenario), c)))
    }

    pub fn summary(&self) -> String {
        let mut lines = vec![format!("scenario={}", self.scenario), format!("seed={}", self.seed)];
        lines.extend(self.values.iter().map(|(k, v)| format!("{k}={v}")));
        for check in &self.checks {
            lines.extend(check.lines());
        }
        for child in &self.children {
            lines.push(format!("component.{}.status={}", child.scenario, status(child.passed())));
        }
        lines.push(format!("status={}", status(self.passed())));
        lines.join("\n") + "\n"
    }

    /// Machine-readable record naming the violated invariant.
    pub fn failure_record(&self) -> Option<String> {
        let (name, check) = self.first_failure()?;
        let mut lines = vec![
            "status=fail".to_string(),
            format!("scenario={}", self.scenario),
            format!("invariant={name}"),
            format!("identity={}", check.identity),
        ];
        match check.verdict {
            Verdict::Within { value, tolerance } => {
                lines.push(format!("value={}", num(value)));
                lines.push(format!("tolerance={}", num(tolerance)));
            }
            Verdict::Holds(h) => lines.push(format!("holds={h}")),
        }
        Some(lines.join("\n") + "\n")
    }

    /// Every file of this report and its children, relative to the report
    /// directory, in emission order.
    pub fn rendered_files(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> =
            self.files.iter().map(|f| (f.name.clone(), f.contents.clone())).collect();
        for child in &self.children {
            for (name, contents) in child.rendered_files() {
                out.push((format!("{}/{name}", child.scenario), contents));
            }
        }
        out.push((SUMMARY_FILE.to_string(), self.summary()));
        if let Some(record) = self.failure_record() {
            out.push((FAILURE_FILE.to_string(), record));
        }
        out
    }
}

/// `sha256  path` lines sorted by path.
pub fn manifest(files: &[(String, String)]) -> String {
    let mut entries: Vec<(&str, String)> = files
        .iter()
        .map(|(name, contents)| (name.as_str(), hex::encode(Sha256::digest(contents.as_bytes()))))
        .collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    entries.iter().map(|(name, digest)| format!("{digest}  {name}\n")).collect()
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| RunError::Io { path: parent.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| RunError::Io { path: path.to_path_buf(), source })
}

/// Writes `files` plus their manifest under `dir`; returns the written paths.
pub fn write_files(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>, RunError> {
    let mut written = Vec::with_capacity(files.len() + 1);
    for (name, contents) in files {
        let path = dir.join(name);
        write_file(&path, contents)?;
        written.push(path);
    }
    let path = dir.join(MANIFEST_FILE);
    write_file(&path, &manifest(files))?;
    written.push(path);
    Ok(written)
}

pub fn emit_report(dir: &Path, report: &ScenarioReport) -> Result<Vec<PathBuf>, RunError> {
    write_files(dir, &report.rendered_files())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ScenarioReport {
        let mut r = ScenarioReport::new("demo", 7);
        r.real("x", 0.1);
        r.check(Check::within("small", "x is small", 1e-12, 1e-10));
        r.check(Check::holds("flag", "flag is set", true));
        r.file("data.csv", "a,b\n1,2\n");
        r
    }

    #[test]
    fn numbers_have_seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.0), "0.0000000000000000e0");
        assert_eq!(num(-2.5), "-2.5000000000000000e0");
        assert_eq!(num(1e-12), "9.9999999999999998e-13");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn summary_layout() {
        let r = sample();
        let text = r.summary();
        assert_eq!(
            text,
            "scenario=demo\nseed=7\nx=1.0000000000000001e-1\ncheck.small.identity=x is small\ncheck.small.value=9.9999999999999998e-13\ncheck.small.tolerance=1.0000000000000000e-10\ncheck.small.status=pass\ncheck.flag.identity=flag is set\ncheck.flag.holds=true\ncheck.flag.status=pass\nstatus=pass\n"
        );
        assert!(r.failure_record().is_none());
    }

    #[test]
    fn failures_are_named_with_their_path() {
        let mut parent = ScenarioReport::new("pipeline", 1);
        let mut child = sample();
        child.check(Check::within("drift", "drift vanishes", f64::NAN, 1e-10));
        parent.children.push(child);
        assert!(!parent.passed());
        let record = parent.failure_record().unwrap();
        assert!(record.contains("invariant=demo/drift\n"));
        assert!(record.contains("value=NaN\n"));
        assert!(parent.summary().contains("component.demo.status=fail\n"));
        let names: Vec<String> = parent.rendered_files().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, vec!["demo/data.csv", "demo/summary.txt", "demo/failure.txt", "summary.txt", "failure.txt"]);
    }

    #[test]
    fn manifest_tracks_content() {
        let files = sample().rendered_files();
        let before = manifest(&files);
        assert_eq!(before.lines().count(), 2);
        assert!(before.lines().next().unwrap().ends_with("  data.csv"));
        let mut changed = files.clone();
        changed[0].1.push_str("3,4\n");
        let after = manifest(&changed);
        assert_ne!(before.lines().next(), after.lines().next());
        assert_eq!(before.lines().nth(1), after.lines().nth(1));
    }

    #[test]
    fn writes_tree_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(dir.path(), &sample()).unwrap();
        assert_eq!(paths.len(), 3);
        let manifest_text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let data = fs::read(dir.path().join("data.csv")).unwrap();
        assert!(manifest_text.contains(&hex::encode(Sha256::digest(&data))));
    }
}
