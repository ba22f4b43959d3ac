//! Scenario-driven command line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime or convergence
//! failure (including failed self-test checks).

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use magprobe::config::ScenarioConfig;
use magprobe::scenario::{run_scenario, write_report, Scenario};

#[derive(Debug, Parser)]
#[command(
    name = "magprobe",
    version,
    about = "Single-ion transport magnetometry simulator",
    after_help = "Scenarios: fig2-gradient-scan, fig3a-running-mean, fig3b-allan, calibrate, selftest"
)]
struct Args {
    /// Scenario to run.
    #[arg(long)]
    scenario: String,

    /// TOML configuration file; built-in defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed (shorthand for --override echo.seed=<N>).
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (shorthand for --override output.dir=<DIR>).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Configuration override, repeatable: key.path=value.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

/// Print a line, tolerating a closed pipe (e.g. `magprobe ... | head`).
fn say(line: &str) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

fn run(args: Args) -> magprobe::Result<ExitCode> {
    // Validate the scenario name before doing any work.
    let scenario = Scenario::parse(&args.scenario)?;

    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("echo.seed={seed}"));
    }
    if let Some(out) = &args.out {
        overrides.push(format!("output.dir=\"{}\"", out.display()));
    }
    let config = ScenarioConfig::load(args.config.as_deref(), &overrides)?;

    say(&format!(
        "scenario {} (seed {}, config hash {:016x})",
        scenario.name(),
        config.echo.seed,
        config.hash()
    ));
    let report = run_scenario(scenario.name(), &config)?;
    for line in &report.summary {
        say(line);
    }
    if !report.files.is_empty() {
        let written = write_report(&report, &config.output.dir)?;
        for path in written {
            say(&format!("wrote {}", path.display()));
        }
    }
    if report.failures > 0 {
        eprintln!("error: {} self-test checks failed", report.failures);
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}
