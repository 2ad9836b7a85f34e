//! Scenario-driven experiment runner for mixtures of linear regressions:
//! generate datasets, run seeded EM / alternating-minimization trials,
//! sweep a scenario knob, and tabulate summaries.

pub mod commands;
pub mod error;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod stats;
pub mod summary;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(
    name = "mlrem",
    version,
    about = "Experiment runner for EM on mixtures of linear regressions"
)]
pub struct Cli {
    /// Worker threads for trials (0 = all cores). Results are identical
    /// in every mode; 1 avoids spawning a pool.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Replace the scenario's base_seed.
    #[arg(long, global = true)]
    pub seed_override: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Sample the scenario's dataset and write it as a JSON container.
    Gen {
        scenario: PathBuf,
        /// Also write a CSV copy.
        #[arg(long)]
        csv: bool,
    },
    /// Run all trials; write per-trial trace CSVs and a summary.
    Run { scenario: PathBuf },
    /// Rerun the scenario per sweep value; write a long-format CSV and a
    /// summary with the fitted log-log slope.
    Sweep { scenario: PathBuf },
    /// Render a markdown comparison table from run summaries.
    Report {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
}

/// Parses arguments, dispatches, and maps failures to exit codes
/// (0 success, 2 config, 3 I/O, 4 numerical).
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Gen { scenario, csv } => {
            let rs = scenario::load_scenario(scenario, cli.seed_override)?;
            let mut stdout = std::io::stdout().lock();
            commands::cmd_gen(&rs, &cli.out, *csv, &mut stdout)?;
            stdout.flush()?;
            Ok(())
        }
        Cmd::Run { scenario } => {
            let rs = scenario::load_scenario(scenario, cli.seed_override)?;
            commands::cmd_run(&rs, &cli.out, cli.jobs)?;
            println!(
                "wrote {}",
                cli.out.join(&rs.id).join("summary.json").display()
            );
            Ok(())
        }
        Cmd::Sweep { scenario } => {
            let rs = scenario::load_scenario(scenario, cli.seed_override)?;
            commands::cmd_sweep(&rs, &cli.out, cli.jobs)?;
            println!(
                "wrote {}",
                cli.out
                    .join(format!("{}_sweep", rs.id))
                    .join("summary.json")
                    .display()
            );
            Ok(())
        }
        Cmd::Report { summaries } => {
            let mut stdout = std::io::stdout().lock();
            let mut stderr = std::io::stderr().lock();
            report::render_report(summaries, &mut stdout, &mut stderr)?;
            stdout.flush()?;
            Ok(())
        }
    }
}
