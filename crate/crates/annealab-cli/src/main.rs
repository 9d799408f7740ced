//! `annealab` — configuration-driven experiment runner.
//!
//! ```text
//! annealab run <config.json> [--mode bounds|sample|verify|study|oracle] [--out DIR] [--seed N]
//! ```
//!
//! Exit codes: 0 success, 1 runtime error (with module context),
//! 2 configuration/schema violation (with the offending field path).
//! `ANNEALAB_THREADS` caps the worker pool; no other environment variable
//! is read.

mod config;
mod runner;

use clap::{Parser, Subcommand};
use runner::{Mode, RunError};

#[derive(Parser)]
#[command(name = "annealab", about = "Annealed Langevin laboratory runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the pipeline described by a JSON config.
    Run {
        /// Path to the experiment config.
        config: String,
        /// Run a single section instead of every section present.
        #[arg(long)]
        mode: Option<String>,
        /// Output directory override.
        #[arg(long)]
        out: Option<String>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() {
    if let Ok(threads) = std::env::var("ANNEALAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            mode,
            out,
            seed,
        } => run(&config, mode.as_deref(), out.as_deref(), seed),
    };
    std::process::exit(code);
}

fn run(config_path: &str, mode: Option<&str>, out: Option<&str>, seed: Option<u64>) -> i32 {
    let raw = match std::fs::read_to_string(config_path) {
        Ok(raw) => raw,
        Err(e) => {
            eprintln!("error: cannot read config {config_path}: {e}");
            return 1;
        }
    };
    let modes = match mode {
        Some(m) => match Mode::parse(m) {
            Ok(mode) => vec![mode],
            Err(e) => {
                eprintln!("error: {e}");
                return 2;
            }
        },
        None => match runner::modes_from_sections(&raw) {
            Ok(modes) => modes,
            Err(RunError::Schema(e)) => {
                eprintln!("error: {e}");
                return 2;
            }
            Err(RunError::Runtime(e)) => {
                eprintln!("error: {e}");
                return 1;
            }
        },
    };
    match runner::run_config(&raw, &modes, out, seed) {
        Ok(()) => 0,
        Err(RunError::Schema(e)) => {
            eprintln!("error: {e}");
            2
        }
        Err(RunError::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
