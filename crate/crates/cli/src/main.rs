use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kscross_cli::{cmd_blowup, cmd_bumps, cmd_run, cmd_sweep, load_config, Failure};

#[derive(Parser)]
#[command(name = "kscross", version, about = "Keller-Segel solver with cross-diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single simulation: diagnostics CSV and snapshots.
    Run { config: PathBuf },
    /// Distance to the delta = 0 solution for several deltas, with a rate fit.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        deltas: Vec<f64>,
    },
    /// Run until the step size collapses or the final time is reached.
    Blowup { config: PathBuf },
    /// Steady bump radius and height for several deltas.
    Bumps {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        deltas: Vec<f64>,
    },
}

fn dispatch(cmd: Command) -> Result<String, Failure> {
    match cmd {
        Command::Run { config } => cmd_run(&load_config(&config)?),
        Command::Sweep { config, deltas } => cmd_sweep(&load_config(&config)?, &deltas),
        Command::Blowup { config } => cmd_blowup(&load_config(&config)?),
        Command::Bumps { config, deltas } => cmd_bumps(&load_config(&config)?, &deltas),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
