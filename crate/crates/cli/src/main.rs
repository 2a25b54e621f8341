mod commands;
mod options;

use std::process::ExitCode;

use clap::Parser;

use crate::options::Cli;

/// Failure classes and their exit statuses.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or missing input files (1).
    Usage(String),
    /// Unreadable or inconsistent data (2).
    Data(String),
    /// A check ran and failed (3).
    Check(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Check(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Check(m) => m,
        }
    }
}

impl From<blockcirc::Error> for Failure {
    fn from(e: blockcirc::Error) -> Self {
        match &e {
            blockcirc::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<blockcirc_hw::Error> for Failure {
    fn from(e: blockcirc_hw::Error) -> Self {
        match e {
            blockcirc_hw::Error::Core(c) => c.into(),
            blockcirc_hw::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => Failure::Usage(io.to_string()),
            blockcirc_hw::Error::InvalidValue(m) => Failure::Usage(m),
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
