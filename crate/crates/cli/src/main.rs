// SPDX-License-Identifier: Apache-2.0

//! `agemon`: run ageing-monitor campaigns and inspect their reports.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agemon::analytics::report::{scores_csv, sweep_csv, Report};
use agemon::analytics::score_payloads;
use agemon::campaign::{run_campaign, sweep_profile, write_outputs};
use agemon::config::{CampaignConfig, ConfigError, ConfigErrors};
use agemon::payloads::PayloadKind;
use clap::{Parser, Subcommand};

/// Overrides `output_dir` from the configuration file.
const OUTPUT_DIR_ENV: &str = "AGEMON_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "agemon", version, about = "Timing-window ageing monitor campaign simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign and write its reports.
    Run {
        config: PathBuf,
        /// Reduce runs per frequency to the CI setting.
        #[arg(long)]
        ci: bool,
        /// Output directory (overrides the file and the environment).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a configuration file and print it fully resolved.
    Validate { config: PathBuf },
    /// Recompute and print the score table of a summary report.
    Score { report: PathBuf },
    /// Print sweep profiles of one device and payload as CSV.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        device: u32,
        #[arg(long)]
        payload: PayloadKind,
        #[arg(long)]
        ci: bool,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn exit(self) -> ExitCode {
        match self {
            Failure::Config(m) => {
                eprintln!("configuration error:\n{m}");
                ExitCode::from(2)
            }
            Failure::Runtime(m) => {
                eprintln!("error: {m}");
                ExitCode::from(3)
            }
        }
    }
}

fn load_config(path: &Path) -> Result<CampaignConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| {
        let errors = ConfigErrors(vec![ConfigError {
            key: path.display().to_string(),
            message: e.to_string(),
        }]);
        Failure::Config(errors.to_string())
    })?;
    CampaignConfig::from_toml(&text).map_err(|e| Failure::Config(e.to_string()))
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, ci, output } => {
            let mut cfg = load_config(&config)?;
            cfg.ci_mode |= ci;
            if let Some(dir) = output.or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from)) {
                cfg.output_dir = dir;
            }
            let search = cfg.effective_search();
            eprintln!(
                "campaign: {} devices, {} temperatures, {} payloads, {} configs, {} runs/frequency",
                cfg.device_count,
                cfg.temperatures.len(),
                cfg.payloads.len(),
                cfg.configs.len(),
                search.runs_per_frequency
            );
            let out = run_campaign(&cfg).map_err(|e| {
                if e.is_config() {
                    Failure::Config(e.to_string())
                } else {
                    runtime(e)
                }
            })?;
            let files = write_outputs(&cfg.output_dir, &cfg, &out).map_err(runtime)?;
            for f in files {
                eprintln!("wrote {}", f.display());
            }
            eprintln!(
                "median step degradation {:.3}%, {} executions, {:.3} s simulated",
                out.report.median_step_degradation, out.report.total_test_executions, out.report.virtual_time_s
            );
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            print!("{}", cfg.to_toml());
            Ok(())
        }
        Command::Score { report } => {
            let text = fs::read_to_string(&report).map_err(|e| runtime(format!("{}: {e}", report.display())))?;
            let parsed = Report::from_json(&text).map_err(runtime)?;
            let scores = score_payloads(&parsed.features).map_err(runtime)?;
            print!("{}", scores_csv(&scores));
            Ok(())
        }
        Command::Sweep {
            config,
            device,
            payload,
            ci,
        } => {
            let mut cfg = load_config(&config)?;
            cfg.ci_mode |= ci;
            let cells = sweep_profile(&cfg, device, payload).map_err(|e| {
                if e.is_config() {
                    Failure::Config(e.to_string())
                } else {
                    runtime(e)
                }
            })?;
            print!("{}", sweep_csv(&cells));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.exit(),
    }
}
