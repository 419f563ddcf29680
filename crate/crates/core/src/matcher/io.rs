//! Voxel containers for fingerprints and parameter maps.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! magic "MRFV" | major u16 | minor u16
//! n_voxels u64 | n_values u64 | metadata_len u64
//! metadata JSON (VolumeMeta), metadata_len bytes
//! values f32[n_voxels · n_values]
//! CRC-64/XZ u64 of everything above
//! ```
//!
//! Fingerprint volumes store `n_points` interleaved `(re, im)` pairs per
//! voxel; map files store one value per channel.
//!
//! CSV fingerprints: one row per voxel, `voxel` id followed by interleaved
//! real/imaginary values. Leading `#` lines are comments; a comment of the
//! form `# schedule_hash: <hex>` declares the acquisition schedule.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crc::{Crc, CRC_64_XZ};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::MatchResult;
use crate::error::{Error, Result};

pub const VOLUME_MAGIC: &[u8; 4] = b"MRFV";
pub const VOLUME_MAJOR: u16 = 1;
pub const VOLUME_MINOR: u16 = 0;
const HEADER_LEN: u64 = 4 + 2 + 2 + 8 * 3;

static CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Content {
    Fingerprints,
    Maps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeMeta {
    pub content: Content,
    pub schedule_hash: Option<String>,
    pub channels: Vec<String>,
    pub shape: Option<Vec<usize>>,
    #[serde(default)]
    pub provenance: serde_json::Value,
}

fn write_container(path: &Path, meta: &VolumeMeta, n_voxels: usize, n_values: usize, data: &[f32]) -> Result<()> {
    let meta_bytes = serde_json::to_vec(meta)?;
    let mut digest = CRC64.digest();
    let mut w = BufWriter::new(File::create(path)?);
    let mut put = |b: &[u8]| -> Result<()> {
        digest.update(b);
        w.write_all(b)?;
        Ok(())
    };
    put(VOLUME_MAGIC)?;
    put(&VOLUME_MAJOR.to_le_bytes())?;
    put(&VOLUME_MINOR.to_le_bytes())?;
    for n in [n_voxels, n_values, meta_bytes.len()] {
        put(&(n as u64).to_le_bytes())?;
    }
    put(&meta_bytes)?;
    let mut buf = Vec::with_capacity(1 << 16);
    for chunk in data.chunks(1 << 14) {
        buf.clear();
        buf.extend(chunk.iter().flat_map(|v| v.to_le_bytes()));
        put(&buf)?;
    }
    let crc = digest.finalize();
    w.write_all(&crc.to_le_bytes())?;
    w.flush()?;
    Ok(())
}

fn read_container(path: &Path) -> Result<(VolumeMeta, usize, usize, Vec<f32>)> {
    let bytes = std::fs::read(path)?;
    let trunc = |what: &str| Error::Truncated(format!("volume file ends inside {what}"));
    if bytes.len() < HEADER_LEN as usize {
        return Err(trunc("header"));
    }
    if &bytes[..4] != VOLUME_MAGIC {
        return Err(Error::Format("not a volume file (bad magic)".into()));
    }
    let major = u16::from_le_bytes([bytes[4], bytes[5]]);
    if major != VOLUME_MAJOR {
        return Err(Error::Version { found: major, supported: VOLUME_MAJOR });
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (n_voxels, n_values, meta_len) = (u64_at(8), u64_at(16), u64_at(24));
    let body = n_voxels.checked_mul(n_values).and_then(|n| n.checked_mul(4));
    let expected = body.and_then(|b| b.checked_add(HEADER_LEN + meta_len + 8));
    let expected = expected.ok_or_else(|| Error::Format("implausible header counts".into()))?;
    if (bytes.len() as u64) < expected {
        return Err(trunc("data"));
    }
    if bytes.len() as u64 > expected {
        return Err(Error::Format("trailing bytes after volume checksum".into()));
    }
    let split = bytes.len() - 8;
    let stored = u64::from_le_bytes(bytes[split..].try_into().unwrap());
    let computed = CRC64.checksum(&bytes[..split]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let m0 = HEADER_LEN as usize;
    let m1 = m0 + meta_len as usize;
    let meta: VolumeMeta = serde_json::from_slice(&bytes[m0..m1])?;
    let data = bytes[m1..split].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((meta, n_voxels as usize, n_values as usize, data))
}

/// Complex fingerprints of many voxels.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    pub schedule_hash: Option<String>,
    pub n_points: usize,
    pub shape: Option<Vec<usize>>,
    /// Interleaved `(re, im)`, `n_points` pairs per voxel.
    pub data: Vec<f32>,
}

impl Volume {
    pub fn new(schedule_hash: Option<String>, n_points: usize) -> Self {
        Self { schedule_hash, n_points, shape: None, data: Vec::new() }
    }

    pub fn n_voxels(&self) -> usize {
        if self.n_points == 0 {
            0
        } else {
            self.data.len() / (2 * self.n_points)
        }
    }

    pub fn push(&mut self, series: &[Complex<f64>]) -> Result<()> {
        if series.len() != self.n_points {
            return Err(Error::LengthMismatch { expected: self.n_points, actual: series.len() });
        }
        self.data.extend(series.iter().flat_map(|v| [v.re as f32, v.im as f32]));
        Ok(())
    }

    pub fn voxel(&self, i: usize) -> impl Iterator<Item = Complex<f64>> + '_ {
        let w = 2 * self.n_points;
        self.data[i * w..(i + 1) * w].chunks_exact(2).map(|c| Complex::new(c[0] as f64, c[1] as f64))
    }

    pub fn save(&self, path: impl AsRef<Path>, provenance: serde_json::Value) -> Result<()> {
        let meta = VolumeMeta {
            content: Content::Fingerprints,
            schedule_hash: self.schedule_hash.clone(),
            channels: vec!["re_im".into()],
            shape: self.shape.clone(),
            provenance,
        };
        write_container(path.as_ref(), &meta, self.n_voxels(), 2 * self.n_points, &self.data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (meta, _, n_values, data) = read_container(path.as_ref())?;
        if meta.content != Content::Fingerprints || n_values % 2 != 0 {
            return Err(Error::Format("file does not hold fingerprints".into()));
        }
        Ok(Self { schedule_hash: meta.schedule_hash, n_points: n_values / 2, shape: meta.shape, data })
    }

    /// Writes the CSV form, with `comments` emitted as leading `#` lines.
    pub fn save_csv(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        if let Some(h) = &self.schedule_hash {
            writeln!(w, "# schedule_hash: {h}")?;
        }
        let mut csv = csv::Writer::from_writer(w);
        let mut header = vec!["voxel".to_string()];
        for k in 0..self.n_points {
            header.push(format!("re{k}"));
            header.push(format!("im{k}"));
        }
        csv.write_record(&header)?;
        for i in 0..self.n_voxels() {
            let w = 2 * self.n_points;
            let mut row = vec![i.to_string()];
            row.extend(self.data[i * w..(i + 1) * w].iter().map(|v| v.to_string()));
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Reads the CSV form. Voxel ids must be `0, 1, 2, ...` in order.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let schedule_hash = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .find_map(|l| l.trim_start_matches('#').trim().strip_prefix("schedule_hash:").map(|h| h.trim().to_string()));
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let n_cols = reader.headers()?.len();
        if n_cols < 3 || (n_cols - 1) % 2 != 0 {
            return Err(Error::Format("expected a voxel column followed by re/im pairs".into()));
        }
        let mut vol = Volume::new(schedule_hash, (n_cols - 1) / 2);
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            let id: usize = rec[0].trim().parse().map_err(|_| Error::Format(format!("bad voxel id '{}'", &rec[0])))?;
            if id != i {
                return Err(Error::Format(format!("voxel ids out of order at row {i}")));
            }
            for field in rec.iter().skip(1) {
                let v: f32 = field.trim().parse().map_err(|_| Error::Format(format!("bad value '{field}'")))?;
                vol.data.push(v);
            }
        }
        Ok(vol)
    }
}

/// Channels written per voxel, in order.
pub const MAP_CHANNELS: [&str; 10] =
    ["t1", "t2", "b1", "f", "pd_re", "pd_im", "pd_abs", "nrmse", "score", "entry_index"];

/// Per-voxel parameter estimates. Unmatched voxels hold NaN everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterMaps {
    pub shape: Option<Vec<usize>>,
    /// Row-major `n_voxels × MAP_CHANNELS.len()`.
    pub values: Vec<f64>,
    /// Error message of each unmatched voxel.
    pub failures: Vec<(usize, String)>,
}

impl ParameterMaps {
    pub fn from_results(results: &[Result<MatchResult>], shape: Option<Vec<usize>>) -> Self {
        let mut values = Vec::with_capacity(results.len() * MAP_CHANNELS.len());
        let mut failures = Vec::new();
        for (i, r) in results.iter().enumerate() {
            match r {
                Ok(m) => values.extend([
                    m.t1_ms,
                    m.t2_ms,
                    m.b1_scale,
                    m.f_frac,
                    m.pd.re,
                    m.pd.im,
                    m.pd.norm(),
                    m.nrmse,
                    m.score,
                    m.entry_index as f64,
                ]),
                Err(e) => {
                    values.extend([f64::NAN; MAP_CHANNELS.len()]);
                    failures.push((i, e.to_string()));
                }
            }
        }
        Self { shape, values, failures }
    }

    pub fn n_voxels(&self) -> usize {
        self.values.len() / MAP_CHANNELS.len()
    }

    pub fn voxel(&self, i: usize) -> &[f64] {
        let w = MAP_CHANNELS.len();
        &self.values[i * w..(i + 1) * w]
    }

    /// Values of one channel across all voxels.
    pub fn channel(&self, name: &str) -> Option<Vec<f64>> {
        let c = MAP_CHANNELS.iter().position(|&n| n == name)?;
        Some(self.values.iter().skip(c).step_by(MAP_CHANNELS.len()).copied().collect())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(std::iter::once("voxel").chain(MAP_CHANNELS))?;
        for i in 0..self.n_voxels() {
            let row = self.voxel(i);
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            csv.write_record(&rec)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Reads the CSV form written by [`ParameterMaps::save_csv`].
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let expected: Vec<&str> = std::iter::once("voxel").chain(MAP_CHANNELS).collect();
        if header != expected {
            return Err(Error::Format(format!("map columns {header:?} differ from {expected:?}")));
        }
        let mut values = Vec::new();
        for rec in reader.records() {
            for field in rec?.iter().skip(1) {
                values.push(field.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad value '{field}'")))?);
            }
        }
        Ok(Self { shape: None, values, failures: Vec::new() })
    }

    /// Binary form; values are stored in single precision.
    pub fn save(&self, path: impl AsRef<Path>, schedule_hash: Option<String>, provenance: serde_json::Value) -> Result<()> {
        let meta = VolumeMeta {
            content: Content::Maps,
            schedule_hash,
            channels: MAP_CHANNELS.iter().map(|s| s.to_string()).collect(),
            shape: self.shape.clone(),
            provenance,
        };
        let data: Vec<f32> = self.values.iter().map(|&v| v as f32).collect();
        write_container(path.as_ref(), &meta, self.n_voxels(), MAP_CHANNELS.len(), &data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (meta, _, n_values, data) = read_container(path.as_ref())?;
        if meta.content != Content::Maps || n_values != MAP_CHANNELS.len() {
            return Err(Error::Format("file does not hold parameter maps".into()));
        }
        let values = data.iter().map(|&v| v as f64).collect();
        Ok(Self { shape: meta.shape, values, failures: Vec::new() })
    }
}
