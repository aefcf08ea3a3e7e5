use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use measuretherm::config::{parse_config, ScenarioKind, DEFAULT_SEED};
use measuretherm::error::{RunError, EXIT_ASSERTION, EXIT_CONFIG, EXIT_PASS};
use measuretherm::report::ScenarioReport;

/// Environment variable holding the log filter, e.g. `info` or `debug`.
const LOG_ENV: &str = "MEASURETHERM_LOG";

#[derive(Parser)]
#[command(name = "measuretherm", version, about = "Seeded measurement and thermodynamics scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available scenarios.
    ListScenarios,
    /// Run the acceptance suite and the default pipeline.
    Selftest {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "measuretherm-selftest")]
        out: PathBuf,
    },
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(u8::try_from(code).expect("exit codes fit in a byte"))
}

fn report_failure(error: &RunError) -> ExitCode {
    eprintln!("error: {error}");
    exit(error.exit_code())
}

fn finish(report: &ScenarioReport, out: &std::path::Path) -> ExitCode {
    println!("scenario={} status={} out={}", report.scenario, if report.passed() { "pass" } else { "fail" }, out.display());
    match report.failure_record() {
        None => exit(EXIT_PASS),
        Some(record) => {
            eprint!("{record}");
            exit(EXIT_ASSERTION)
        }
    }
}

fn run(config_path: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> ExitCode {
    let text = match std::fs::read_to_string(&config_path) {
        Ok(text) => text,
        Err(source) => return report_failure(&RunError::Read { path: config_path, source }),
    };
    let mut config = match parse_config(&text) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {}: {e}", config_path.display());
            return exit(EXIT_CONFIG);
        }
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(out) = out {
        config.output_path = out;
    }
    match measuretherm::run_and_emit(&config) {
        Ok(report) => finish(&report, &config.output_path),
        Err(e) => report_failure(&e),
    }
}

fn selftest(seed: u64, out: PathBuf) -> ExitCode {
    match measuretherm::selftest(seed, &out) {
        Ok(outcome) => {
            for criterion in &outcome.criteria {
                println!("{criterion}");
            }
            finish(&outcome.pipeline, &out.join(measuretherm::PIPELINE_DIR));
            if outcome.passed() {
                exit(EXIT_PASS)
            } else {
                exit(EXIT_ASSERTION)
            }
        }
        Err(e) => report_failure(&e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    match Cli::parse().command {
        Command::Run { config, seed, out } => run(config, seed, out),
        Command::ListScenarios => {
            for kind in ScenarioKind::ALL {
                println!("{:<20} {}", kind.name(), kind.description());
            }
            exit(EXIT_PASS)
        }
        Command::Selftest { seed, out } => selftest(seed, out),
    }
}
