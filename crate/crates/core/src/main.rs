use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use horolab::cli::{execute, CliError, Command, ExperimentConfig};

/// Run one horolab experiment from a JSON config.
#[derive(Parser, Debug)]
#[command(name = "horolab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Primary output path; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = ExperimentConfig::load(&args.config)
        .and_then(|c| execute(args.command, &c, args.out.as_deref(), args.seed));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => report(&e),
    }
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}
