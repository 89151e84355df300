use std::fmt;

use shotnoise::Error;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or inputs outside a model's domain (exit 2).
    Domain(String),
    /// A computation that did not converge or overflowed (exit 3).
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    /// Wraps a library error with the point it occurred at.
    pub fn at(context: impl fmt::Display, e: Error) -> Self {
        let msg = format!("{context}: {e}");
        if e.is_domain() {
            CliError::Domain(msg)
        } else {
            CliError::Numeric(msg)
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Domain(m) => write!(f, "error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::at("computation", e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(format!("output: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Domain(format!("output: {e}"))
    }
}
