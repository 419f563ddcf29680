//! Scripted studies: phantom comparison, sensitivity to fixed exchange
//! assumptions, separation of relaxation and MT effects, noise recovery and
//! region-of-interest statistics.

mod roi;
mod studies;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, GridSpec, ParamTuple};
use crate::error::{Error, Result};
use crate::sequence::Schedule;

pub use roi::{roi_stats, roi_table, RoiStat};
pub use studies::{
    noise_recovery, phantom_report, sensitivity_grid, separation_study, PhantomCell, PhantomReport, RecoveryReport,
    Sample, SensitivityCell, SensitivityConfig, SensitivityReport, SeparationConfig, SeparationReport, SeparationTrial,
};

/// Where a report came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: Option<u64>,
    pub schedule_hashes: Vec<String>,
    pub dictionary_hashes: Vec<String>,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(seed: Option<u64>, schedules: &[&Schedule], dicts: &[&Dictionary], config: serde_json::Value) -> Self {
        Self {
            generator: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            seed,
            schedule_hashes: schedules.iter().map(|s| s.hash()).collect(),
            dictionary_hashes: dicts.iter().map(|d| d.content_hash()).collect(),
            config,
        }
    }
}

/// Tabular study output with summary statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: BTreeMap<String, f64>,
    pub provenance: Provenance,
}

impl StudyReport {
    /// CSV with `#` comment lines carrying study name, provenance and summary.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "# study: {}", self.study)?;
        writeln!(w, "# provenance: {}", serde_json::to_string(&self.provenance)?)?;
        writeln!(w, "# summary: {}", serde_json::to_string(&self.summary)?)?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.columns)?;
        for r in &self.rows {
            csv.write_record(r)?;
        }
        csv.flush()?;
        Ok(())
    }
}

/// Additive complex white noise at a time-series SNR.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

/// Deterministic generator for case `stream` of a seeded study.
pub fn case_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Adds complex Gaussian noise with per-sample variance `mean|s|² / 10^(snr/10)`.
pub fn add_noise(signal: &mut [Complex<f64>], snr_db: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    if !snr_db.is_finite() {
        return Err(Error::NonFinite("snr_db"));
    }
    if signal.is_empty() {
        return Ok(());
    }
    let power = signal.iter().map(|v| v.norm_sqr()).sum::<f64>() / signal.len() as f64;
    let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(format!("noise: {e}")))?;
    for v in signal.iter_mut() {
        *v += Complex::new(normal.sample(rng), normal.sample(rng));
    }
    Ok(())
}

/// Fractional index of `v` on a sorted axis, linear between nodes and
/// clamped at the ends.
pub fn axis_position(axis: &[f64], v: f64) -> f64 {
    match axis.len() {
        0 => f64::NAN,
        1 => 0.0,
        n => {
            if v <= axis[0] {
                return 0.0;
            }
            if v >= axis[n - 1] {
                return (n - 1) as f64;
            }
            let i = axis.partition_point(|&a| a <= v) - 1;
            i as f64 + (v - axis[i]) / (axis[i + 1] - axis[i])
        }
    }
}

/// Per-axis distance between `truth` and `est` in grid steps (T1, T2, B1, F).
pub fn grid_steps(grid: &GridSpec, truth: &ParamTuple, est: &ParamTuple) -> [f64; 4] {
    let d = |axis: &[f64], a: f64, b: f64| (axis_position(axis, a) - axis_position(axis, b)).abs();
    [
        d(&grid.t1_ms, truth.t1_ms, est.t1_ms),
        d(&grid.t2_ms, truth.t2_ms, est.t2_ms),
        d(&grid.b1, truth.b1, est.b1),
        grid.f_frac.as_deref().map_or(0.0, |f| d(f, truth.f_frac, est.f_frac)),
    ]
}

/// Every axis within one grid step.
pub fn within_one_step(grid: &GridSpec, truth: &ParamTuple, est: &ParamTuple) -> bool {
    grid_steps(grid, truth, est).iter().all(|&s| s <= 1.0 + 1e-9)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn check_pair(dict: &Dictionary, schedule: &Schedule) -> Result<String> {
    let h = schedule.hash();
    if h != dict.metadata.schedule_hash {
        return Err(Error::ScheduleMismatch { dictionary: dict.metadata.schedule_hash.clone(), query: h });
    }
    Ok(h)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests;
