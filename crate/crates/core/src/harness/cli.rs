use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

use super::config::{load_config, Mode};
use super::run::{run_mode, RunOptions};

/// Steady states and bifurcation diagrams of an age-structured
/// predator-prey system.
#[derive(Debug, Parser)]
#[command(name = "agebif", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub mode: Mode,
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, overriding `output.directory`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Solve independent parameter points concurrently.
    #[arg(long)]
    pub parallel: bool,
    /// Seed of the randomized property trials.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 success, 1 invalid input, 2 solver failure, 3 failed verification.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = load_config(&cli.config).and_then(|cfg| {
        let opts = RunOptions {
            out: cli.out.clone(),
            parallel: cli.parallel,
            seed: cli.seed,
        };
        run_mode(cli.mode, &cfg, &opts)
    });
    match result {
        Ok(outcome) => {
            // a closed pipe (e.g. `| head`) is not a failure of the run
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", outcome.summary.trim_end());
            for f in &outcome.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("agebif: {e}");
            e.exit_code()
        }
    }
}
