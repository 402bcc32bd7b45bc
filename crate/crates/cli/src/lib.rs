//! Experiment harness for the fractional Ornstein-Uhlenbeck sheet
//! toolkit: configuration parsing and validation, experiment dispatch,
//! and report persistence.
//!
//! The binary front-end (`fou-sheet`) is a thin wrapper over this
//! library; everything observable, from config resolution to payload
//! bytes, is testable in-process. Runs are deterministic per (config,
//! seed): modules receive replication indices, reduction order is fixed
//! by index, and reports avoid non-reproducible content (wall-clock
//! time is surfaced on stderr, never written to files).

use thiserror::Error;

pub mod config;
pub mod experiments;
pub mod report;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    /// Every failed check, not just the first.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("experiment '{experiment}' failed: {message}")]
    Runtime { experiment: String, message: String },
    #[error("i/o failure on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    /// Process exit code contract: 1 validation (parse included),
    /// 2 runtime, 3 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 1,
            CliError::Runtime { .. } => 2,
            CliError::Io { .. } => 3,
        }
    }
}
