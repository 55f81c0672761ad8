use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlw_kam::scenario::{run_scenario, Command, Config, Status};
use nlw_kam::Error;

#[derive(Parser)]
#[command(name = "nlw-kam", version, about = "Normal-form engine for the truncated nonlinear wave equation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check both nonresonance conditions for the target frequencies.
    Audit(Args),
    /// Monte Carlo failure fraction of the nonresonance conditions per γ.
    Measure(Args),
    /// Run the normal-form iteration with frequency freezing.
    Kam(Args),
    /// Run the iteration, then integrate the normal form on the torus.
    Verify(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long)]
    threads: Option<usize>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidArgument { .. } => 2,
        Error::Resonance(_) | Error::Nonresonance(_) => 3,
        Error::Contraction { .. } | Error::JacobianDominance { .. } | Error::NewtonDiverged { .. } => 4,
        Error::Integrator { .. } => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Audit(a) => (Command::Audit, a),
        Cmd::Measure(a) => (Command::Measure, a),
        Cmd::Kam(a) => (Command::Kam, a),
        Cmd::Verify(a) => (Command::Verify, a),
    };
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = Config::load(&args.config).and_then(|cfg| {
        let outcome = run_scenario(command, &cfg)?;
        outcome.artifacts.write(&args.out)?;
        Ok(outcome.status)
    });
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::RejectedSteps) => {
            eprintln!("error: at least one step missed its norm targets; see report.json");
            ExitCode::from(4)
        }
        Ok(Status::Resonant) => {
            eprintln!("error: target frequencies fail the nonresonance audit; see report.json");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
