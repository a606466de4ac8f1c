//! The `pmc` command line: subcommands, configuration and exit codes.

pub mod commands;
pub mod config;
pub mod expr;
pub mod output;

use std::ffi::OsString;
use std::fmt;

use clap::Parser;

pub use commands::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_CONFIG: i32 = 65;

#[derive(Debug)]
pub enum CliError {
    /// Arguments that parse but make no sense (exit 2).
    Validation(String),
    /// A numerical precondition failed (exit 3).
    Numerical(pmc_core::Error),
    /// Unknown flag or subcommand (exit 64).
    Usage(String),
    /// Malformed configuration or input file (exit 65).
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Usage(m) | CliError::Config(m) => f.write_str(m),
            CliError::Numerical(e) => write!(f, "{e}"),
        }
    }
}

impl From<pmc_core::Error> for CliError {
    fn from(e: pmc_core::Error) -> Self {
        use pmc_core::Error as E;
        match e {
            E::Io(_) | E::Csv(_) | E::Json(_) => CliError::Config(e.to_string()),
            e if e.is_numerical() => CliError::Numerical(e),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status. Help and version requests print and return 0.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match commands::execute(cli) {
        Ok(summary) => {
            println!("{}", output::to_json_string(&summary));
            EXIT_OK
        }
        Err(e) => {
            eprintln!("pmc: {e}");
            e.exit_code()
        }
    }
}
