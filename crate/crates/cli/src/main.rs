use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use neurofl_cli::{cmd_compare, cmd_simulate, load_config, resolve_out_dir, CliError};

/// Feedback linearization with online RBF compensation: closed-loop experiments.
#[derive(Parser)]
#[command(name = "neurofl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its trajectory CSV and metrics.
    Simulate(RunArgs),
    /// Run the scenario with the baseline and the compensated controller.
    Compare(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory [default: config output.dir, then $NEUROFL_OUT_DIR, then .]
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Simulate(args) => {
            let config = load_config(&args.config)?;
            let dir = resolve_out_dir(args.out_dir.as_deref(), &config);
            cmd_simulate(&config, &dir, &mut stdout)
        }
        Command::Compare(args) => {
            let config = load_config(&args.config)?;
            let dir = resolve_out_dir(args.out_dir.as_deref(), &config);
            cmd_compare(&config, &dir, &mut stdout)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = run(cli).unwrap_or_else(|err| {
        eprintln!("neurofl: {err}");
        err.exit_code()
    });
    ExitCode::from(code as u8)
}
