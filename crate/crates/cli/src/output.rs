//! Errors, provenance blocks and output helpers.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { kind: "usage", message: message.into(), code: 2 }
    }

    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind, "message": self.message } }).to_string()
    }
}

impl From<mtmrf::Error> for CliError {
    fn from(e: mtmrf::Error) -> Self {
        use mtmrf::Error::*;
        let kind = match &e {
            InvalidParameter(_) | NonFinite(_) | UnsupportedEvent(_) => "invalid_input",
            Config(_) => "config",
            LengthMismatch { .. } => "length_mismatch",
            ScheduleMismatch { .. } => "schedule_mismatch",
            ZeroSignal => "zero_signal",
            Simulation { .. } => "simulation",
            Format(_) | Version { .. } | Checksum { .. } | Truncated(_) => "format",
            Io(_) => "io",
            Json(_) | Csv(_) => "parse",
        };
        Self { kind, message: e.to_string(), code: 1 }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self { kind: "io", message: e.to_string(), code: 1 }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self { kind: "parse", message: e.to_string(), code: 1 }
    }
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    Ok(hex_sha256(&std::fs::read(path)?))
}

/// Provenance attached to every output.
#[derive(Clone, Debug, Serialize)]
pub struct RunProvenance {
    pub command: &'static str,
    pub config_hash: String,
    pub config: Value,
    pub schedule_hashes: Vec<String>,
    pub dictionary_hashes: Vec<String>,
    pub versions: Value,
}

impl RunProvenance {
    pub fn new(command: &'static str, config: Value) -> Self {
        Self {
            command,
            config_hash: hex_sha256(config.to_string().as_bytes()),
            config,
            schedule_hashes: Vec::new(),
            dictionary_hashes: Vec::new(),
            versions: json!({ "mtmrf": mtmrf_version(), "mtmrf-cli": env!("CARGO_PKG_VERSION") }),
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).unwrap_or(Value::Null)
    }

    /// Writes `<out>.prov.json`.
    pub fn write_sidecar(&self, out: &Path) -> Result<PathBuf, CliError> {
        let mut name = out.as_os_str().to_owned();
        name.push(".prov.json");
        let path = PathBuf::from(name);
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

fn mtmrf_version() -> String {
    mtmrf::VERSION.to_string()
}
