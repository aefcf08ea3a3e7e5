//! Scenario runner, report emitter and acceptance suite for measuretherm-core.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod report;
pub mod scenarios;

use std::path::Path;
use std::time::Instant;

use crate::acceptance::{run_criterion, CriterionResult, CRITERIA};
use crate::config::{ScenarioConfig, ScenarioKind};
use crate::error::RunError;
use crate::report::{write_files, ScenarioReport};

pub const ACCEPTANCE_FILE: &str = "acceptance.txt";
pub const PIPELINE_DIR: &str = "pipeline";

/// Runs `config` and writes its report under the configured output path.
pub fn run_and_emit(config: &ScenarioConfig) -> Result<ScenarioReport, RunError> {
    let report = scenarios::run_scenario(config)?;
    report::emit_report(&config.output_path, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestOutcome {
    pub criteria: Vec<CriterionResult>,
    pub pipeline: ScenarioReport,
}

impl SelftestOutcome {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed) && self.pipeline.passed()
    }
}

/// Runs acceptance criteria 1 to 8 and the default pipeline, writing
/// `acceptance.txt`, `pipeline/` and a manifest under `out`. Elapsed times
/// go to the log only, so the tree depends on nothing but `seed`.
pub fn selftest(seed: u64, out: &Path) -> Result<SelftestOutcome, RunError> {
    let mut criteria = Vec::with_capacity(CRITERIA.len());
    for id in CRITERIA {
        let start = Instant::now();
        let result = run_criterion(id, seed);
        log::info!("criterion {id} finished in {:.3} s", start.elapsed().as_secs_f64());
        criteria.push(result);
    }
    let mut config = ScenarioConfig::defaults(ScenarioKind::FullPipeline);
    config.seed = seed;
    let pipeline = scenarios::run_scenario(&config)?;

    let mut acceptance: String = criteria.iter().map(|c| format!("{c}\n")).collect();
    acceptance.push_str(&format!("seed={seed}\n"));
    let mut files = vec![(ACCEPTANCE_FILE.to_string(), acceptance)];
    files.extend(
        pipeline
            .rendered_files()
            .into_iter()
            .map(|(name, contents)| (format!("{PIPELINE_DIR}/{name}"), contents)),
    );
    write_files(out, &files)?;
    Ok(SelftestOutcome { criteria, pipeline })
}
