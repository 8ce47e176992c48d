use std::fmt;
use std::process::ExitCode;

use mew_core::chain::{ChainError, EnsembleError};
use mew_core::diagnostics::{DiagnosticsError, SweepError};
use mew_core::enumeration::EnumerationError;
use mew_core::graph::GraphError;

/// Failure classes with their documented exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Invalid flags or flag values: exit 2.
    Usage,
    /// Unreadable, malformed or inconsistent input files: exit 3.
    Input,
    /// The computation itself failed: exit 4.
    Runtime,
    /// The enumeration work limit was exceeded: exit 5.
    WorkLimit,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: Kind::Usage, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self { kind: Kind::Input, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { kind: Kind::Runtime, message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self.kind {
            Kind::Usage => 2,
            Kind::Input => 3,
            Kind::Runtime => 4,
            Kind::WorkLimit => 5,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Attaches a path to an I/O failure on an input file.
pub fn read_error(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::input(format!("{}: {e}", path.display()))
}

/// Attaches a path to an I/O failure on an output file.
pub fn write_error(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::runtime(format!("cannot write {}: {e}", path.display()))
}

pub fn graph_error(path: &std::path::Path, e: GraphError) -> CliError {
    read_error(path, e)
}

pub fn chain_error(e: ChainError) -> CliError {
    match e {
        ChainError::InvalidConfig(_) => CliError::usage(e.to_string()),
        ChainError::TreeGraph | ChainError::Energy(_) => CliError::input(e.to_string()),
        ChainError::Init(_) | ChainError::State(_) | ChainError::Verify { .. } => CliError::runtime(e.to_string()),
    }
}

pub fn ensemble_error(e: EnsembleError) -> CliError {
    let inner = chain_error(e.source);
    CliError { kind: inner.kind, message: format!("chain {}: {}", e.chain, inner.message) }
}

pub fn enumeration_error(e: EnumerationError) -> CliError {
    match e {
        EnumerationError::WorkLimit(_) => CliError {
            kind: Kind::WorkLimit,
            message: format!("{e}; raise --work-limit to continue"),
        },
        EnumerationError::BadPartCount { .. } => CliError::usage(e.to_string()),
        EnumerationError::Energy(_) => CliError::input(e.to_string()),
        EnumerationError::BaselineExhausted(_) | EnumerationError::Io(_) => CliError::runtime(e.to_string()),
    }
}

pub fn diagnostics_error(e: DiagnosticsError) -> CliError {
    match e {
        DiagnosticsError::TooFewChains(_) | DiagnosticsError::BadCheckpoints | DiagnosticsError::BadThin => {
            CliError::usage(e.to_string())
        }
        DiagnosticsError::Empty | DiagnosticsError::CheckpointBeyondData { .. } => CliError::input(e.to_string()),
        DiagnosticsError::Invalid(_) => CliError::usage(e.to_string()),
    }
}

pub fn sweep_error(e: SweepError) -> CliError {
    match e {
        SweepError::Invalid(m) => CliError::usage(format!("invalid sweep: {m}")),
        SweepError::Ensemble { row, col, source } => {
            let inner = ensemble_error(source);
            CliError { kind: inner.kind, message: format!("cell ({row}, {col}): {}", inner.message) }
        }
        SweepError::Statistic { row, col, source } => {
            let inner = diagnostics_error(source);
            CliError { kind: inner.kind, message: format!("cell ({row}, {col}): {}", inner.message) }
        }
    }
}
