//! Argument parsing and dispatch. Flags override the config file.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qrobust_core::attacks::AttackKind;
use qrobust_core::model::Variant;

use crate::commands;
use crate::config::{ConfigError, ExperimentConfig};
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "qrobust", version, about = "Train, attack and compare classical and hybrid quantum-classical classifiers")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML experiment config; every field is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Root directory for run outputs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_variant)]
    pub model: Option<Variant>,
    /// Name of the run directory under the output root.
    #[arg(long, global = true)]
    pub run_id: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the selected model and write checkpoint, history and metrics.
    Train,
    /// Sweep attacks over the ε grid against a trained checkpoint.
    Attack(AttackArgs),
    /// Rank circuit architectures by clean and adversarial accuracy.
    Search(SearchArgs),
    /// Merge a run directory's artifacts into report.json.
    Report(ReportArgs),
    /// Write the configured synthetic dataset as CSV.
    Synth,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// Restrict the sweep to these attacks (repeatable).
    #[arg(long = "attack", value_parser = parse_attack)]
    pub attacks: Vec<AttackKind>,
    #[arg(long)]
    pub eps_start: Option<f64>,
    #[arg(long)]
    pub eps_end: Option<f64>,
    #[arg(long)]
    pub eps_step: Option<f64>,
    /// Checkpoint to attack instead of the run directory's own.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Search only the first N enumerated candidates.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory; defaults to the configured one.
    pub run_dir: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: qrobust_core::Error| e.to_string())
}

fn parse_attack(s: &str) -> Result<AttackKind, String> {
    s.parse().map_err(|e: qrobust_core::Error| e.to_string())
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

/// Loads the config and applies command-line overrides, then validates.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    if let Some(model) = c.model {
        cfg.model = model;
    }
    if let Some(id) = &c.run_id {
        cfg.run_id = Some(id.clone());
    }
    match &cli.command {
        Command::Attack(a) => {
            if !a.attacks.is_empty() {
                cfg.attack.kinds = a.attacks.clone();
            }
            if a.eps_start.is_some() || a.eps_end.is_some() || a.eps_step.is_some() {
                cfg.attack.epsilons = None;
            }
            cfg.attack.eps_start = a.eps_start.unwrap_or(cfg.attack.eps_start);
            cfg.attack.eps_end = a.eps_end.unwrap_or(cfg.attack.eps_end);
            cfg.attack.eps_step = a.eps_step.unwrap_or(cfg.attack.eps_step);
        }
        Command::Search(s) if s.limit.is_some() => cfg.search.limit = s.limit,
        _ => {}
    }
    // `report` only reads an existing run directory.
    if !matches!(cli.command, Command::Report(_)) {
        cfg.validate()?;
    }
    Ok(cfg)
}

/// Runs one parsed invocation and returns the files it wrote.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = resolve_config(cli)?;
    let written = match &cli.command {
        Command::Train => commands::train(&cfg)?,
        Command::Attack(a) => commands::attack(&cfg, a.checkpoint.as_deref())?,
        Command::Search(_) => commands::search(&cfg)?,
        Command::Report(r) => {
            let dir = r.run_dir.clone().unwrap_or_else(|| cfg.run_dir());
            vec![report::write_report(&dir)?]
        }
        Command::Synth => commands::synth(&cfg)?,
    };
    Ok(written)
}

/// Parses `args`, runs, prints written paths to stdout and errors to stderr,
/// and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
