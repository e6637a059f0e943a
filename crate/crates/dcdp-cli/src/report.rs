//! Run manifest embedded in every report.
//!
//! Re-running a command on the same inputs reproduces the report except for
//! the `timings` block, which records wall-clock seconds.

use crate::input::CliError;
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<C: Serialize> {
    /// Subcommand name.
    pub command: String,
    /// Raw argv as invoked.
    pub argv: Vec<String>,
    pub version: String,
    pub inputs: Vec<InputRecord>,
    /// Fully resolved configuration, defaults materialized.
    pub config: C,
    pub outputs: Vec<String>,
    /// Wall-clock seconds; varies between runs.
    pub timings: serde_json::Value,
}

impl<C: Serialize> Manifest<C> {
    pub fn new(command: &str, argv: &[String], config: C) -> Self {
        Manifest {
            command: command.to_string(),
            argv: argv.to_vec(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            config,
            outputs: Vec::new(),
            timings: serde_json::Value::Null,
        }
    }

    pub fn input(mut self, path: &Path, sha256: String) -> Self {
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            sha256,
        });
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }
}

/// Writes a report as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, report: &T) -> Result<(), CliError> {
    let mut body = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::runtime(format!("cannot serialize report: {e}")))?;
    body.push('\n');
    std::fs::write(path, body)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}
