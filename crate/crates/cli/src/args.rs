//! Flag definitions and merging with an optional JSON config file.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::output::CliError;

#[derive(Parser)]
#[command(name = "mtmrf", version, about = "Two-pool MR fingerprinting: schedules, dictionaries, matching, studies")]
pub struct Cli {
    /// JSON object of option values; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Build an IRFF or IRFF-MT schedule and print its summary.
    Schedule(ScheduleArgs),
    /// Generate a dictionary and save it.
    Dict(DictArgs),
    /// Match fingerprints against a dictionary.
    Match(MatchArgs),
    /// Run a study and write its report.
    Study(StudyArgs),
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleArgs {
    /// Sequence kind: irff | irff-mt.
    #[arg(long)]
    pub kind: Option<String>,
    /// Schedule document to load instead of the defaults.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Pulses per segment for the default schedule.
    #[arg(long)]
    pub pulses: Option<usize>,
    /// Where to write the schedule document.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictArgs {
    /// Sequence kind: irff | irff-mt.
    #[arg(long)]
    pub kind: Option<String>,
    /// Signal model: single-pool | two-pool.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    #[arg(long)]
    pub pulses: Option<usize>,
    /// Grid preset: desk | full.
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub grid_t1: Option<usize>,
    #[arg(long)]
    pub grid_t2: Option<usize>,
    #[arg(long)]
    pub grid_b1: Option<usize>,
    /// Nonzero F values (two-pool only).
    #[arg(long)]
    pub grid_f: Option<usize>,
    /// Simulation arithmetic: f32 | f64.
    #[arg(long)]
    pub precision: Option<String>,
    /// Slice-profile bins; 0 uses an ideal rectangular profile.
    #[arg(long)]
    pub profile_bins: Option<usize>,
    #[arg(long)]
    pub max_order: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Allow dictionaries above the memory guard.
    #[arg(long)]
    #[serde(default)]
    pub confirm_large: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchArgs {
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Fingerprints: `.csv` or binary volume.
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format: csv | binary (default from the extension).
    #[arg(long)]
    pub format: Option<String>,
    /// complex | magnitude.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyArgs {
    /// phantom | sensitivity | separation | recovery | roi.
    pub study: Option<String>,
    /// Dictionary files (repeatable).
    #[arg(long)]
    #[serde(default)]
    pub dict: Vec<PathBuf>,
    /// Schedule document for IRFF dictionaries.
    #[arg(long)]
    pub schedule_irff: Option<PathBuf>,
    /// Schedule document for IRFF-MT dictionaries.
    #[arg(long)]
    pub schedule_irff_mt: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time-series SNR in dB; omitted means noiseless.
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub grid_t2ss: Option<usize>,
    #[arg(long)]
    pub grid_k: Option<usize>,
    /// `lo,hi` in µs.
    #[arg(long)]
    pub t2ss_range: Option<String>,
    /// `lo,hi` in 1/s.
    #[arg(long)]
    pub k_range: Option<String>,
    /// `t1_ms,t2_ms,b1,f`.
    #[arg(long)]
    pub truth: Option<String>,
    /// Parameter maps (roi study).
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    /// CSV with a `label` column, one row per voxel (roi study).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Comma-separated map channels (roi study).
    #[arg(long)]
    pub channels: Option<String>,
}

fn is_unset(v: &Value) -> bool {
    match v {
        Value::Null | Value::Bool(false) => true,
        Value::Array(a) => a.is_empty(),
        _ => false,
    }
}

/// Overlays set flags onto the config file's values and returns the merged
/// arguments together with their JSON form.
pub fn resolve<A: Serialize + DeserializeOwned>(config: Option<&Path>, flags: &A) -> Result<(A, Value), CliError> {
    let mut merged = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::usage(format!("config {}: {e}", p.display())))?;
            match serde_json::from_str::<Value>(&text).map_err(|e| CliError::usage(format!("config: {e}")))? {
                Value::Object(m) => m,
                _ => return Err(CliError::usage("config file must hold a JSON object")),
            }
        }
        None => Map::new(),
    };
    if let Value::Object(m) = serde_json::to_value(flags).map_err(|e| CliError::usage(e.to_string()))? {
        for (k, v) in m {
            if !is_unset(&v) {
                merged.insert(k, v);
            }
        }
    }
    let merged = Value::Object(merged);
    let args = serde_json::from_value(merged.clone()).map_err(|e| CliError::usage(format!("config: {e}")))?;
    Ok((args, merged))
}
