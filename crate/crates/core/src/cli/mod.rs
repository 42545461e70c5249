//! The `renorm` command line: `run`, `section` and `verify`.
//!
//! Exit codes: 0 success, 1 certificate failure, 2 configuration error,
//! 3 size-cap abort.

pub mod config;
pub mod run;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{PipelineConfig, Sabotage, SizeCaps, TargetSpec};
pub use run::{run, section, RunOutcome};
pub use verify::{verify, Suite};

use crate::RenormError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIZE_CAP: i32 = 3;

/// Exit code for an error escaping a command.
pub fn exit_code(err: &RenormError) -> i32 {
    match err {
        RenormError::Config(_) | RenormError::Json(_) => EXIT_CONFIG,
        RenormError::SizeCap { .. } => EXIT_SIZE_CAP,
        _ => EXIT_FAILED,
    }
}

#[derive(Debug, Parser)]
#[command(name = "renorm", version, about = "Smooth approximation of polytope norms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the smoothed norm, run all certificates, write report.json and manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a planar section of both unit spheres as CSV.
    Section {
        #[arg(long)]
        config: PathBuf,
        /// Two distinct axis indices, e.g. 0,1.
        #[arg(long)]
        axes: String,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one invariant suite: convexity, smoothness, inclusions, projection, nets or all.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        suite: String,
    },
}

/// Caps the worker pool at `RENORM_THREADS` when set.
fn configure_threads() -> Result<(), RenormError> {
    let Ok(value) = std::env::var("RENORM_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| RenormError::Config(format!("RENORM_THREADS must be a positive integer, got {value:?}")))?;
    // A pool that already exists (repeated in-process calls) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out.as_deref()).map(|o| o.passed),
        Command::Section {
            config,
            axes,
            samples,
            out,
        } => section(&config, &axes, samples, &out).map(|_| true),
        Command::Verify { config, suite } => verify(&config, &suite),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
