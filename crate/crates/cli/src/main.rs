use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ergolab_cli::{run, validate_bytes, CliError};
use ergolab_core::io::format_number;
use ergolab_core::oracles::{run_oracle, ORACLE_NAMES};

#[derive(Parser)]
#[command(name = "ergolab", version, about = "Numerical laboratory for statistical behaviour of dynamical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its run directory.
    Run {
        config: PathBuf,
        /// Run directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report every problem in a configuration without running it.
    Validate { config: PathBuf },
    /// Print the values of a brute-force oracle (`all` for every one).
    Oracle { name: String },
}

fn read(path: &PathBuf) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn report(e: &CliError) -> ExitCode {
    match e {
        CliError::Validation(problems) => {
            eprintln!("error: {e}");
            for p in problems {
                eprintln!("  {p}");
            }
        }
        CliError::Invariant { run_dir, .. } => {
            eprintln!("error: {e}");
            eprintln!("outputs kept in {}", run_dir.display());
        }
        _ => eprintln!("error: {e}"),
    }
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let result = read(&config).and_then(|bytes| run(&bytes, out.as_deref()));
            match result {
                Ok((dir, manifest)) => {
                    println!("{} run written to {}", manifest.experiment, dir.display());
                    for c in &manifest.invariants {
                        println!("  ok {}: {}", c.name, c.record);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => report(&e),
            }
        }
        Command::Validate { config } => match read(&config) {
            Ok(bytes) => {
                let problems = validate_bytes(&bytes);
                if problems.is_empty() {
                    println!("{}: ok", config.display());
                    ExitCode::SUCCESS
                } else {
                    report(&CliError::Validation(problems))
                }
            }
            Err(e) => report(&e),
        },
        Command::Oracle { name } => {
            let names: Vec<&str> = if name == "all" { ORACLE_NAMES.to_vec() } else { vec![name.as_str()] };
            for n in names {
                match run_oracle(n) {
                    Ok(values) => {
                        for v in values {
                            println!("{n}\t{}\t{}", v.label, format_number(v.value));
                        }
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        eprintln!("known oracles: {}", ORACLE_NAMES.join(", "));
                        return ExitCode::from(2);
                    }
                }
            }
            ExitCode::SUCCESS
        }
    }
}
