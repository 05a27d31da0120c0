use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dualflow_cli::{parse_with_overrides, run_command, CommandRegistry, Status};

/// Normalized sign-changing solutions of a quasilinear Schrödinger equation.
#[derive(Parser, Debug)]
#[command(name = "dualflow", version)]
struct Cli {
    /// One of: solve, multisolve, certify-dual, check-equivalence, probe, sweep
    command: String,
    /// TOML config with [model], [grid], [flow] and [run] sections
    #[arg(long)]
    config: PathBuf,
    /// Override a config entry after parsing, e.g. --set model.lambda=2.5
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

fn exit(status: Status) -> ExitCode {
    ExitCode::from(status.code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let registry = CommandRegistry::default();
    if registry.get(&cli.command).is_none() {
        eprintln!(
            "error: unknown command '{}' (expected one of {})",
            cli.command,
            registry.names().join(", ")
        );
        return exit(Status::ParameterError);
    }
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", cli.config.display());
            return exit(Status::ParameterError);
        }
    };
    let config = match parse_with_overrides(&text, &cli.set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit(Status::ParameterError);
        }
    };
    match run_command(&registry, &cli.command, &config) {
        Ok(outcome) => {
            if let Some(e) = &outcome.error {
                eprintln!("error: {e}");
            }
            println!("{}", outcome.dir.display());
            exit(outcome.status)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
