use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "fcco", version, about = "Run FCCO solvers from TOML configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config and write trace.csv and report.json.
    Run { config: PathBuf },
    /// Check the configured problem's Jacobians, gradients and proximal maps.
    Gradcheck { config: PathBuf },
    /// Run every *.toml in a directory and print a CSV summary.
    Bench { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => fcco::run::cmd_run(&config),
        Command::Gradcheck { config } => fcco::gradcheck::cmd_gradcheck(&config),
        Command::Bench { dir } => fcco::bench::cmd_bench(&dir),
    };
    ExitCode::from(code as u8)
}
