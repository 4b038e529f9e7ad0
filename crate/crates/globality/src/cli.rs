//! Thin command-line front end over [`crate::experiment`].
//!
//! Exit codes: 0 on success, 2 when the run finished but produced warnings
//! (outputs are still written), 1 on failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::Result;
use crate::experiment::{run, ExperimentConfig, RunSummary};

#[derive(Parser, Debug)]
#[command(
    name = "globality",
    about = "Global-optimality tests for local likelihood optima",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// key=value configuration file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (overrides the config file)
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override a single configuration key (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Scan the benchmark likelihood and enumerate its local optima
    Profile,
    /// Benchmark trials, test statistics, and detection curves
    Roc,
    /// Learn relaxation directions from optimizer failures
    Discover,
    /// Pupil-plane toolbox: shells, PSFs, bounds, restart demo
    Wavefront,
}

impl Command {
    fn key(self) -> &'static str {
        match self {
            Command::Profile => "profile",
            Command::Roc => "roc",
            Command::Discover => "discover",
            Command::Wavefront => "wavefront",
        }
    }
}

/// Resolve the effective configuration: file first, then the subcommand,
/// then individual flags, most specific last.
pub fn config_from_cli(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::new(),
    };
    cfg.set("experiment", cli.command.key())?;
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(out) = &cli.out {
        cfg.set("out_dir", &out.to_string_lossy())?;
    }
    for pair in &cli.set {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            crate::error::Error::Config(format!("--set expects KEY=VALUE, got {pair:?}"))
        })?;
        cfg.set(key.trim(), value.trim())?;
    }
    Ok(cfg)
}

pub fn run_from_args<I, T>(args: I) -> Result<RunSummary>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)
        .map_err(|e| crate::error::Error::Config(e.to_string()))?;
    let cfg = config_from_cli(&cli)?;
    run(&cfg)
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match config_from_cli(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&cfg) {
        Ok(summary) => {
            for file in &summary.files {
                println!("{}", file.display());
            }
            if summary.warnings.is_empty() {
                ExitCode::SUCCESS
            } else {
                for w in &summary.warnings {
                    eprintln!("warning: {w}");
                }
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_subcommand_sets_experiment() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("base.cfg");
        std::fs::write(&path, "seed=1\nalpha=0.2\n").unwrap();
        let cli = Cli::try_parse_from([
            "globality",
            "roc",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "9",
            "--out",
            "/tmp/x",
            "--set",
            "trials=10",
        ])
        .unwrap();
        let cfg = config_from_cli(&cli).unwrap();
        assert_eq!(cfg.get("experiment"), "roc");
        assert_eq!(cfg.get("seed"), "9");
        assert_eq!(cfg.get("out_dir"), "/tmp/x");
        assert_eq!(cfg.get("trials"), "10");
        assert_eq!(cfg.get("alpha"), "0.2");
    }

    #[test]
    fn bad_set_pairs_are_rejected() {
        let cli = Cli::try_parse_from(["globality", "profile", "--set", "trials"]).unwrap();
        assert!(config_from_cli(&cli).is_err());
        let cli = Cli::try_parse_from(["globality", "profile", "--set", "nope=1"]).unwrap();
        assert!(config_from_cli(&cli).is_err());
    }
}
