//! Command-line front end: `drssd <lower|upper|both|verify|sweep|example>`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use drssd::cli_io::{run, Command, RunOptions, Units};

#[derive(Debug, Parser)]
#[command(name = "drssd", version, about = "Bounds for distributionally robust SSD-constrained problems")]
struct Args {
    /// lower, upper, both, verify, sweep or example
    command: Command,
    /// Run configuration (JSON)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for random grids and for `verify`
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of random instances for `verify`
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Units of the returns file: percent or fraction
    #[arg(long)]
    units: Option<Units>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts =
        RunOptions { command: args.command, config: args.config, seed: args.seed, out: args.out, trials: args.trials, units: args.units };
    match run(&opts) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
