//! Command-line front end for the annealkin toolkit.
//!
//! The binary reads a strict JSON config, maps it onto validated domain
//! objects, runs one of the five experiment kinds, and writes its artifacts
//! (CSV tables, JSON summaries, optional SVG charts) plus a run manifest
//! into an output directory. Reruns of the same config and seed produce
//! byte-identical artifacts; only the wall-clock fields of the manifest
//! differ.

pub mod config;
pub mod manifest;
pub mod plot;
pub mod runner;

use thiserror::Error;

/// CLI failure classes, mapped onto process exit codes by the binary:
/// config problems exit with 2, domain/runtime problems with 1.
#[derive(Debug, Error)]
pub enum CliError {
    /// The config file is unreadable, malformed, or semantically invalid.
    #[error("{0}")]
    Config(String),
    /// The config parsed but the experiment itself failed.
    #[error("{0}")]
    Domain(String),
}

impl From<annealkin::Error> for CliError {
    fn from(e: annealkin::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
