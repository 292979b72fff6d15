use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use clustered_consensus::scenario::{self, Scenario, ScenarioError};

/// Hybrid consensus simulator for clustered multi-agent networks.
///
/// A scenario is a JSON file path or the name of a bundled scenario
/// (paper-fig1, paper-fig1-leaders-only, paper-fig2). Set RUST_LOG=info for
/// progress output.
#[derive(Parser)]
#[command(name = "clustered-consensus", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and write trajectory.csv, summary.json and trajectory.svg.
    Run {
        scenario: String,
        #[arg(short, long)]
        out: PathBuf,
        /// Run even when the network fails validation.
        #[arg(long)]
        force: bool,
    },
    /// Re-run with uniform impulse spacings and print a CSV table.
    Sweep {
        scenario: String,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        delta: Vec<f64>,
        #[arg(long)]
        force: bool,
    },
    /// Check network hypotheses and, if present, the certificate LMIs.
    Verify { scenario: String },
}

fn execute(cli: Cli) -> Result<ExitCode, ScenarioError> {
    match cli.command {
        Command::Run { scenario, out, force } => {
            let summary = scenario::run_scenario(&scenario, &out, force)?;
            if let Some(v) = summary.consensus_value {
                println!("consensus value {v:.10}");
            }
            println!("spread at T {:.3e}; artifacts in {}", summary.spread_at_t, out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { scenario, delta, force } => {
            let s = Scenario::load(&scenario)?;
            let rows = scenario::sweep(&s, &delta, force)?;
            print!("{}", scenario::sweep_csv(&rows));
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { scenario } => {
            let report = scenario::verify(&Scenario::load(&scenario)?)?;
            for line in &report.lines {
                println!("{line}");
            }
            Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
