//! Command-line front end for the chain-transport simulator.
//!
//! Exit status: 0 when every run is valid, 2 when some run is invalid,
//! 1 on configuration or I/O errors.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::RabiArgs;
use config::RunArgs;

#[derive(Parser)]
#[command(name = "chain-transport", version, about = "Noisy single-excitation transport on a disordered chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Disorder-averaged master-equation probability frames.
    Evolve(RunArgs),
    /// Single quantum trajectories with their jump records.
    Trajectory(RunArgs),
    /// Power-law fits of the mean-square displacement over a grid.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Fit `c·t^α` injected in place of simulated data, as `c,alpha`.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        synthetic: Option<Vec<f64>>,
    },
    /// Squared two-site Rabi amplitudes.
    Rabi(RabiArgs),
}

fn init_threads(args: &RunArgs) -> anyhow::Result<()> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Evolve(args) => {
            init_threads(&args)?;
            commands::evolve(&args)
        }
        Command::Trajectory(args) => {
            init_threads(&args)?;
            commands::trajectory(&args)
        }
        Command::Sweep { run, synthetic } => {
            init_threads(&run)?;
            let synthetic = match synthetic.as_deref() {
                None => None,
                Some([c, alpha]) => Some((*c, *alpha)),
                Some(_) => anyhow::bail!("--synthetic takes c,alpha"),
            };
            commands::sweep(&run, synthetic)
        }
        Command::Rabi(args) => {
            commands::rabi(&args, &mut std::io::stdout().lock())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some runs were invalid; see the manifest");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
