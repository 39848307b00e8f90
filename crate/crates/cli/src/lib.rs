//! Library surface of the command-line front end: config schema, command
//! implementations and run-directory reports, kept separate from the
//! binary so integration tests can drive them directly.

pub mod commands;
pub mod config;
pub mod report;

#[derive(Debug)]
pub enum CliError {
    Schema(config::SchemaError),
    Numerical(String),
    Io(std::io::Error),
}

impl CliError {
    pub fn io(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Schema(e) => write!(f, "config error at {e}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}
