//! Experiment harness for the statistical-stability pipeline.
//!
//! One experiment per invocation, driven by a TOML config. Exit codes:
//! 0 success, 2 validation failure, 3 numerical failure, 4 property
//! violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lorenz_stability::config::ExperimentConfig;
use lorenz_stability::experiments::{self, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "lorenz-stability", version, about = "Statistical-stability experiments for Lorenz-type maps and flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run {
        /// Path to the TOML experiment config.
        config: PathBuf,
        /// Output directory (defaults to the config's run.out_dir, then the
        /// LORENZ_STABILITY_OUT environment variable, then the working
        /// directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config against every precondition without running anything.
    Validate {
        /// Path to the TOML experiment config.
        config: PathBuf,
    },
    /// List the available experiment kinds.
    ListExperiments,
}

fn load(config: &PathBuf) -> Result<(ExperimentConfig, String), (i32, String)> {
    let raw = std::fs::read_to_string(config)
        .map_err(|e| (1, format!("cannot read {}: {e}", config.display())))?;
    let cfg = ExperimentConfig::from_toml(&raw).map_err(|e| (2, e.to_string()))?;
    Ok((cfg, raw))
}

fn resolve_out_dir(cfg: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    if let Some(dir) = flag {
        return dir;
    }
    if !cfg.run.out_dir.is_empty() {
        return PathBuf::from(&cfg.run.out_dir);
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from(".")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out } => match load(&config) {
            Ok((cfg, raw)) => {
                let out_dir = resolve_out_dir(&cfg, out);
                match experiments::run(&cfg, &raw, &out_dir) {
                    Ok(manifest) => {
                        println!(
                            "{} finished; {} output file(s) in {}",
                            manifest.kind,
                            manifest.outputs.len(),
                            out_dir.display()
                        );
                        for d in &manifest.derived {
                            println!("  {} = {}", d.name, d.value);
                        }
                        0
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        e.exit_code()
                    }
                }
            }
            Err((code, msg)) => {
                eprintln!("error: {msg}");
                code
            }
        },
        Command::Validate { config } => match load(&config) {
            Ok((cfg, _)) => {
                let report = cfg.validate();
                if report.is_empty() {
                    println!("ok: config is runnable ({})", cfg.kind.name());
                    0
                } else {
                    for line in &report {
                        eprintln!("violation: {line}");
                    }
                    2
                }
            }
            Err((code, msg)) => {
                eprintln!("error: {msg}");
                code
            }
        },
        Command::ListExperiments => {
            print!("{}", experiments::list_experiments());
            0
        }
    };
    ExitCode::from(code as u8)
}
