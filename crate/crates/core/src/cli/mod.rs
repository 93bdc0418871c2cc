//! Command-line front end for the `zerophase` binary.

mod args;
mod commands;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub use args::*;
pub use commands::*;

use crate::error::{Error, ErrorClass};

#[derive(Debug, Parser)]
#[command(name = "zerophase", version, about = "STFT phase derivatives near zeros")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute an STFT grid for one window variant.
    Stft(StftArgs),
    /// Phase derivative in time or frequency, with mask.
    Phasegrad(PhasegradArgs),
    /// Locate, refine and classify STFT zeros.
    Zeros(ZerosArgs),
    /// Histogram of the time phase derivative for white noise.
    Noisehist(NoisehistArgs),
    /// Closed-form STFT of a two-tone signal on the stft grid.
    TwotoneOracle(OracleArgs),
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Usage => 1,
        ErrorClass::Io => 2,
        ErrorClass::Numerical => 3,
    }
}

pub fn execute(command: &Command) -> crate::Result<Written> {
    match command {
        Command::Stft(a) => {
            let mut m = merge_with_config(a, a.config.as_deref())?;
            m.config = a.config.clone();
            cmd_stft(&m)
        }
        Command::Phasegrad(a) => {
            let mut m = merge_with_config(a, a.config.as_deref())?;
            m.config = a.config.clone();
            cmd_phasegrad(&m)
        }
        Command::Zeros(a) => {
            let mut m = merge_with_config(a, a.config.as_deref())?;
            m.config = a.config.clone();
            cmd_zeros(&m)
        }
        Command::Noisehist(a) => {
            let mut m = merge_with_config(a, a.config.as_deref())?;
            m.config = a.config.clone();
            cmd_noisehist(&m)
        }
        Command::TwotoneOracle(a) => {
            let mut m = merge_with_config(a, a.config.as_deref())?;
            m.config = a.config.clone();
            cmd_twotone_oracle(&m)
        }
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(w) => {
            for p in w.paths() {
                eprintln!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
