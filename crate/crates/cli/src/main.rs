use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use expflow_cli::{execute, Command, Options};

/// Certify, simulate and verify exponentially convergent forward-backward
/// and gradient flows.
#[derive(Debug, Parser)]
#[command(name = "expflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed for the default initial point and the operator audit.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print failures only.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check the theorem's hypotheses and write certificate.json.
    Certify,
    /// Integrate the flow and write trajectory.csv.
    Simulate,
    /// Certify, integrate and check the envelope; writes report.json.
    Verify,
    /// Certify every cell of a parameter grid; writes sweep.csv.
    Sweep,
    /// Print the problem registry.
    List,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(4);
        }
    };
    let command = match cli.command {
        Cmd::Certify => Command::Certify,
        Cmd::Simulate => Command::Simulate,
        Cmd::Verify => Command::Verify,
        Cmd::Sweep => Command::Sweep,
        Cmd::List => Command::List,
    };
    let opts = Options { config: cli.config, out: cli.out, seed: cli.seed };
    match execute(command, &opts) {
        Ok(outcome) => {
            if !cli.quiet {
                for m in &outcome.messages {
                    println!("{m}");
                }
                for a in &outcome.artifacts {
                    println!("wrote {}", a.display());
                }
            }
            for f in &outcome.failures {
                eprintln!("{f}");
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
