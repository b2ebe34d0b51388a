//! The `obsbatch` command line.
//!
//! Every run prints its fully resolved configuration as one JSON line on
//! stderr before doing anything. Failures end with one JSON line on stderr
//! (`{"error": ..., "kind": ..., "exit_code": ...}`) and exit codes 1 for a
//! failed verification, 2 for usage errors and 3 for I/O or corrupt data.

mod args;
mod commands;
mod ingest;
mod synth;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;
use serde::Serialize;

pub use args::{parse_count, Command};
pub use commands::{suggest_chunking, ChunkingSuggestion};
pub use ingest::{ingest_csv, ingest_triplet};
pub use synth::{synth_store, SynthSpec};

use crate::loader::LoaderError;
use crate::preshuffle::ShuffleError;
use crate::store::StoreError;

#[derive(Debug, Parser, Serialize)]
#[command(name = "obsbatch", version, about = "Chunked observation stores, pre-shuffling and shuffled minibatch loading")]
pub struct Cli {
    /// Seed for every random choice of the command.
    #[arg(long, global = true, default_value = "0", value_parser = parse_count)]
    pub seed: u64,
    /// Progress messages on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Store to create, or file for reports (default: stdout).
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Verify(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Verify(_) => "verification",
            CliError::Io(_) => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verify(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        if e.is_io_or_corruption() {
            CliError::Io(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<ShuffleError> for CliError {
    fn from(e: ShuffleError) -> Self {
        match e {
            ShuffleError::Store(e) => e.into(),
            ShuffleError::MissingProvenance(_) | ShuffleError::CorruptProvenance(_) => {
                CliError::Io(e.to_string())
            }
            ShuffleError::InvalidPlan(_) | ShuffleError::Incompatible(_) => {
                CliError::Usage(e.to_string())
            }
        }
    }
}

impl From<LoaderError> for CliError {
    fn from(e: LoaderError) -> Self {
        match &e {
            LoaderError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            LoaderError::Fetch { source, .. } if !source.is_io_or_corruption() => {
                CliError::Usage(e.to_string())
            }
            LoaderError::Fetch { .. } => CliError::Io(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn error_line(err: &mut dyn Write, e: &CliError) {
    let line = serde_json::json!({
        "error": e.to_string(),
        "kind": e.kind(),
        "exit_code": e.exit_code(),
    });
    let _ = writeln!(err, "{line}");
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.to_string();
            // clap's message runs up to a blank line before the usage block
            let text: Vec<&str> = msg.lines().take_while(|l| !l.trim().is_empty()).map(str::trim).collect();
            let text = text.join(" ");
            let text = text.trim_start_matches("error: ");
            error_line(err, &CliError::Usage(if text.is_empty() { "invalid arguments".into() } else { text.into() }));
            return 2;
        }
    };
    let _ = writeln!(
        err,
        "{}",
        serde_json::json!({ "resolved_config": serde_json::to_value(&cli).unwrap() })
    );
    match commands::dispatch(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            error_line(err, &e);
            e.exit_code()
        }
    }
}
