//! Library side of the `edlseg` executable; every subcommand is a plain
//! function so it can be driven from tests.

pub mod commands;
pub mod config;

use std::fmt;

pub use commands::*;
pub use config::RunConfig;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CHECK_FAILED: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const DATA_CONTRACT: u8 = 4;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(exit::USAGE, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(exit::IO, message)
    }

    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<edlseg::Error> for CliError {
    fn from(e: edlseg::Error) -> Self {
        use edlseg::Error as E;
        let code = match &e {
            E::Config(_) | E::Placement { .. } => exit::USAGE,
            E::Io(_) | E::Format { .. } | E::Version { .. } => exit::IO,
            E::DataContract(_) | E::ClassOutOfRange { .. } => exit::DATA_CONTRACT,
            _ => exit::CHECK_FAILED,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}
