use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use reachkit::cli::{run_command, write_artifacts, Command, Overrides};
use reachkit::config::{parse_config, OutputFormat};
use reachkit::ReachError;

/// Boundary, support function and volume of bounded-input LTI reach sets.
#[derive(Debug, Parser)]
#[command(name = "reachkit", version)]
struct Args {
    command: Command,
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Directory for artifacts; without it the main artifact goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    /// Grid points per axis for the switching and blend parameters.
    #[arg(long)]
    grid: Option<usize>,
    /// Monte Carlo sample count for `validate`.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: ReachError| e.to_string())
}

fn run(args: &Args) -> Result<i32, ReachError> {
    let document = std::fs::read_to_string(&args.config)?;
    let config = parse_config(&document)?;
    let overrides = Overrides {
        dt: args.dt,
        grid: args.grid,
        samples: args.samples,
        seed: args.seed,
        format: args.format,
    };
    let outcome = run_command(args.command, &config, &overrides)?;
    match &args.out {
        Some(dir) => {
            for path in write_artifacts(&outcome, dir)? {
                println!("{}", path.display());
            }
        }
        None => {
            if let Some(a) = outcome.primary() {
                print!("{}", a.contents);
            }
        }
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
