use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use superheat::cli::{load_scenario, run, Command, RunOptions};

/// Run a scenario and write summary.json and table.csv.
#[derive(Debug, Parser)]
#[command(name = "superheat", version)]
struct Args {
    /// classify | simulate | certify | transform-check | norms | contract | sweep
    command: String,
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for sweeps.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Exit with 4 when a verdict is indeterminate.
    #[arg(long)]
    strict: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match args.command.parse::<Command>().and_then(|c| Ok((c, load_scenario(&args.config)?))) {
        Ok((command, scenario)) => run(command, &scenario, &RunOptions { out: args.out, jobs: args.jobs, strict: args.strict }),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
