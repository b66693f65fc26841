//! Command-line front end: run configuration, the example catalog, and
//! orchestration of the analysis, check, solve and regularity runs.

pub mod build;
pub mod catalog;
pub mod config;
pub mod run;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;

pub use config::{parse_config, parse_config_str, parse_with, serialize_config, ConfigError, Overrides, RunConfig, Subcommand};
pub use run::{execute, run, Category, Outcome};

#[derive(Debug, Clone, Parser)]
#[command(name = "orlicz", version, about = "Young functions, operator checks and sub/supersolution solves")]
pub struct Cli {
    #[arg(value_enum)]
    pub subcommand: Subcommand,
    /// Catalog entry to run, or to print with `catalog`.
    pub entry: Option<String>,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Size of the worker pool; 1 gives reproducible reports.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory (default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Solver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Resolves the configuration named by the command line.
pub fn load(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let overrides = Overrides {
        subcommand: Some(cli.subcommand),
        catalog: cli.entry.clone(),
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out.as_ref().map(|p| p.display().to_string()),
        tolerance: cli.tol,
    };
    match &cli.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
            parse_with(&text, path.parent(), &overrides)
        }
        None => parse_with("", None, &overrides),
    }
}

/// Output directory of a run.
pub fn out_dir(config: &RunConfig) -> PathBuf {
    PathBuf::from(config.out.as_deref().unwrap_or("out"))
}

/// Runs the command line and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let config = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            let category = match e {
                ConfigError::Io { .. } => Category::Io,
                _ => Category::Config,
            };
            let stub = RunConfig { subcommand: Some(cli.subcommand), ..RunConfig::default() };
            let outcome = Outcome::failure(&stub, category, e.to_string());
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let _ = outcome.write(&dir);
            eprintln!("error[{}]: {e}", category.as_str());
            return outcome.exit_code();
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(config.threads).build_global() {
        eprintln!("warning: worker pool already initialized: {e}");
    }
    let dir = out_dir(&config);
    let outcome = run(&config, &dir);
    // a closed stdout (e.g. a pipe into `head`) must not turn a finished run
    // into a panic; the artifacts are already on disk
    let mut stdout = std::io::stdout().lock();
    let _ = write!(stdout, "{}", outcome.summary);
    if let Some(c) = outcome.failure {
        let message = outcome.report.get("error").and_then(|v| v.as_str()).unwrap_or(c.as_str());
        eprintln!("error[{}]: {message}", c.as_str());
    }
    let _ = writeln!(stdout, "artifacts in {}", display(&dir));
    outcome.exit_code()
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
