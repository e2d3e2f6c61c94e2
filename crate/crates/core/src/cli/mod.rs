//! Scenario runner behind the `spinfiber` binary.
//!
//! ```text
//! spinfiber run <config>                      run a scenario file
//! spinfiber verify <suite> [--seed N] [--tol X]
//! spinfiber list-scenarios
//! ```
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error,
//! 3 a declared check failed.

pub mod config;
pub mod output;
mod scenarios;
mod suites;

pub use config::{ConfigError, FieldSpec, Scenario, ScenarioConfig, Thresholds};
pub use output::{read_timeseries, write_timeseries, Check, Summary, TIMESERIES_COLUMNS};
pub use scenarios::{simulate, SimulationOutput};
pub use suites::verify;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;

/// Overrides `output.dir` of every scenario.
pub const OUTPUT_DIR_ENV: &str = "SPINFIBER_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    ConfigError = 1,
    RuntimeError = 2,
    VerificationFailed = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            Self::Config(_) => ExitStatus::ConfigError,
            Self::Runtime(_) => ExitStatus::RuntimeError,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<output::OutputError> for CliError {
    fn from(e: output::OutputError) -> Self {
        Self::Runtime(e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Summary,
    pub summary_path: PathBuf,
    pub timeseries_paths: Vec<PathBuf>,
}

impl RunReport {
    pub fn status(&self) -> ExitStatus {
        if self.summary.passed {
            ExitStatus::Success
        } else {
            ExitStatus::VerificationFailed
        }
    }
}

/// `$SPINFIBER_OUTPUT_DIR` if set and non-empty, else `output.dir`.
pub fn output_dir(cfg: &ScenarioConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => cfg.output.dir.clone(),
    }
}

fn labelled(name: &str, label: &str) -> String {
    if label == "main" {
        return name.to_string();
    }
    match name.rsplit_once('.') {
        Some((stem, ext)) => format!("{stem}_{label}.{ext}"),
        None => format!("{name}_{label}"),
    }
}

/// Runs a validated configuration and writes its artifacts under `out_dir`.
pub fn run_config(cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let mut timeseries_paths = Vec::new();
    let mut summary = if cfg.scenario.is_verification() {
        verify(cfg)?
    } else {
        let out = simulate(cfg)?;
        let mut summary = out.summary;
        for (label, traj) in &out.trajectories {
            let name = labelled(&cfg.output.timeseries, label);
            let path = out_dir.join(&name);
            write_timeseries(traj, &path)?;
            summary
                .artifacts
                .insert(format!("timeseries_{label}"), name);
            timeseries_paths.push(path);
        }
        summary
    };
    summary
        .artifacts
        .insert("summary".into(), cfg.output.summary.clone());
    let summary_path = out_dir.join(&cfg.output.summary);
    summary.write(&summary_path)?;
    info!(
        "{}: {} ({} checks), summary at {}",
        cfg.scenario,
        if summary.passed { "passed" } else { "FAILED" },
        summary.checks.len(),
        summary_path.display()
    );
    Ok(RunReport {
        summary,
        summary_path,
        timeseries_paths,
    })
}

/// Loads, runs and writes a scenario file.
pub fn run_file(path: &Path) -> Result<RunReport, CliError> {
    let cfg = ScenarioConfig::load(path)?;
    run_config(&cfg, &output_dir(&cfg))
}

/// Default configuration of a verification suite with CLI overrides.
pub fn suite_config(
    name: &str,
    seed: Option<u64>,
    tol: Option<f64>,
) -> Result<ScenarioConfig, ConfigError> {
    let scenario = Scenario::from_name(name)
        .filter(|s| s.is_verification())
        .ok_or_else(|| ConfigError {
            path: "suite".into(),
            message: format!("unknown verification suite `{name}` (expected so3, lorentz or t4)"),
        })?;
    let mut cfg = ScenarioConfig::template(scenario);
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(tol) = tol {
        if !(tol > 0.0) {
            return Err(ConfigError {
                path: "--tol".into(),
                message: format!("must be positive, got {tol}"),
            });
        }
        cfg.thresholds.override_all(tol);
    }
    cfg.output.summary = format!("{}_summary.json", scenario.name());
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Parser)]
#[command(
    name = "spinfiber",
    version,
    about = "Classical spin on constraint surfaces: scenarios and verification suites"
)]
pub struct Args {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario described by a TOML (or .json) file.
    Run { config: PathBuf },
    /// Run a verification suite: so3, lorentz or t4.
    Verify {
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Replace every tolerance of the suite.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// List scenario names.
    ListScenarios,
    /// Print a template configuration for a scenario.
    Template { scenario: String },
}

fn report(r: &RunReport) -> ExitStatus {
    for c in &r.summary.checks {
        println!(
            "{:<6} {:<32} {:>12.4e} {} {:.1e}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.value,
            match c.bound {
                output::Bound::Below => "<",
                output::Bound::Above => ">",
            },
            c.threshold
        );
    }
    println!("summary: {}", r.summary_path.display());
    r.status()
}

/// Executes parsed arguments and returns the process exit status.
pub fn execute(args: Args) -> ExitStatus {
    let result = match args.command {
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<16} {}", s.name(), s.description());
            }
            return ExitStatus::Success;
        }
        Command::Template { scenario } => match Scenario::from_name(&scenario) {
            Some(s) => {
                print!("{}", ScenarioConfig::template(s).to_toml());
                return ExitStatus::Success;
            }
            None => Err(CliError::Config(ConfigError {
                path: "scenario".into(),
                message: format!("unknown scenario `{scenario}`"),
            })),
        },
        Command::Run { config } => run_file(&config),
        Command::Verify { suite, seed, tol } => suite_config(&suite, seed, tol)
            .map_err(CliError::from)
            .and_then(|cfg| run_config(&cfg, &output_dir(&cfg))),
    };
    match result {
        Ok(r) => report(&r),
        Err(e) => {
            eprintln!("error: {e}");
            e.status()
        }
    }
}
