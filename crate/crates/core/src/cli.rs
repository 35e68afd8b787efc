//! The `dsgd` command line: `run`, `validate`, `report`.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 experiment
//! failure (including a report whose summaries disagree with the records).

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::experiments::{prepare, render_report, report_dir, run_campaign, ExperimentConfig};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "dsgd", version, about = "Distributed SGD experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the campaign described by a TOML config.
    Run {
        config: PathBuf,
        /// Result directory (overrides `output` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and print it with every default resolved.
    Validate { config: PathBuf },
    /// Recompute and print the aggregates of a result directory.
    Report { dir: PathBuf },
}

fn code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::MixedHashes(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn fail(e: Error) -> i32 {
    eprintln!("dsgd: {e}");
    code(&e)
}

fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    let cfg = ExperimentConfig::load(path)?;
    prepare(&cfg)?;
    Ok(cfg)
}

/// Run the CLI on `argv` (including the program name) and return the exit
/// code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                println!("# config ok, hash {}", cfg.hash());
                print!("{}", cfg.canonical());
                EXIT_OK
            }
            Err(e) => fail(e),
        },
        Command::Run { config, out } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let dir = out
                .or_else(|| cfg.output.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(format!("results/{}-{}", cfg.kind.as_str(), cfg.hash())));
            let result = match run_campaign(&cfg) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            if let Err(e) = result.write(&dir, &cfg.canonical()) {
                eprintln!("dsgd: writing {}: {e}", dir.display());
                return EXIT_FAILURE;
            }
            print!("{}", result.summary_text());
            println!("# results in {}", dir.display());
            EXIT_OK
        }
        Command::Report { dir } => match report_dir(&dir) {
            Ok(entries) => {
                print!("{}", render_report(&entries));
                if entries.iter().any(|e| !e.mismatches.is_empty()) {
                    EXIT_FAILURE
                } else {
                    EXIT_OK
                }
            }
            Err(e) => fail(e),
        },
    }
}
