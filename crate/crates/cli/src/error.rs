use std::fmt;

use collar_core::CollarError;

/// Invalid flags, config or parameters.
pub const EXIT_INPUT: i32 = 2;
/// A certificate or acceptance flag in the results is false.
pub const EXIT_FAILED_CHECK: i32 = 1;
/// Numerical failure or I/O error.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_NUMERIC,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CollarError> for CliError {
    fn from(e: CollarError) -> Self {
        match e {
            CollarError::Domain(_) | CollarError::PowerMismatch(_) => CliError::input(e.to_string()),
            _ => CliError::numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::numeric(format!("io: {e}"))
    }
}
