use std::path::PathBuf;
use std::process::ExitCode;

use agentic_control::commands::{self, exit_code, Outcome, RunOptions};
use agentic_control::experiments::{preset, PRESET_NAMES};
use agentic_control::{Error, Result};
use clap::{Args, Parser, Subcommand};

/// Simulate agentic control loops and check their stability certificates.
#[derive(Parser)]
#[command(name = "agentic-control", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario; writes trajectory.csv, events.csv, summary.csv.
    Simulate(RunArgs),
    /// Dwell-time x delay sweep; writes sweep.csv and boundary.csv.
    Sweep(RunArgs),
    /// Simulate and trace the stability budget; writes budget.csv,
    /// certificate.csv, constants.csv.
    Budget(RunArgs),
    /// Check the certificates without simulating.
    Certify(RunArgs),
    /// Print a built-in preset scenario as TOML.
    Preset {
        /// One of the preset names; omit to list them.
        name: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Override the integrator step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Override the simulated horizon (s).
    #[arg(long)]
    horizon: Option<f64>,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            out: self.out.clone(),
            workers: self.workers,
            dt: self.dt,
            horizon: self.horizon,
        }
    }
}

fn run_with(args: &RunArgs, f: fn(&agentic_control::config::ScenarioConfig, &RunOptions) -> Result<Outcome>) -> Result<Outcome> {
    let opts = args.options();
    let cfg = commands::load(&args.config, &opts)?;
    f(&cfg, &opts)
}

fn print_preset(name: Option<&str>) -> Result<Outcome> {
    let report = match name {
        None => PRESET_NAMES.join("\n") + "\n",
        Some(n) => preset(n)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown preset {n:?}; try one of {}", PRESET_NAMES.join(", "))))?
            .to_toml_string()?,
    };
    Ok(Outcome {
        report,
        written: Vec::new(),
        non_finite: false,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => run_with(a, commands::cmd_simulate),
        Command::Sweep(a) => run_with(a, commands::cmd_sweep),
        Command::Budget(a) => run_with(a, commands::cmd_budget),
        Command::Certify(a) => run_with(a, commands::cmd_certify),
        Command::Preset { name } => print_preset(name.as_deref()),
    };
    match &result {
        Ok(outcome) => {
            print!("{}", outcome.report);
            for p in &outcome.written {
                eprintln!("wrote {}", p.display());
            }
            if outcome.non_finite {
                eprintln!("error: run stopped on a non-finite state");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
