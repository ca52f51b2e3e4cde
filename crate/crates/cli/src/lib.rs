//! Command implementations behind the `fae` binary.

pub mod audit;
pub mod config;
pub mod explain;
pub mod setup;
pub mod toy_table;

use std::io::Write;
use std::path::Path;

use fae_core::{Error, ErrorCategory};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_MODEL: u8 = 4;
pub const EXIT_NUMERIC: u8 = 5;
pub const EXIT_MISMATCH: u8 = 6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("{} toy-table cell(s) differ from the published values: {}", .0.len(), .0.join("; "))]
    ToyMismatch(Vec<String>),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.class(),
            CliError::ToyMismatch(_) => "toy-table-mismatch",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.category() {
                ErrorCategory::Config => EXIT_CONFIG,
                ErrorCategory::Data => EXIT_DATA,
                ErrorCategory::Model => EXIT_MODEL,
                ErrorCategory::Numeric => EXIT_NUMERIC,
            },
            CliError::ToyMismatch(_) => EXIT_MISMATCH,
        }
    }

    /// Single line: `error[<class>]: <message>`.
    pub fn render(&self) -> String {
        let message = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {message}", self.class())
    }
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}
