//! Binary dictionary container.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic "MRFD" | major u16 | minor u16
//! n_t1 u32 | n_t2 u32 | n_b1 u32 | n_f u32 | flags u32 (bit 0: F axis present)
//! n_entries u64 | n_points u64 | metadata_len u64
//! axes f64[n_t1 + n_t2 + n_b1 + n_f]
//! params f64[4 · n_entries]            (t1, t2, b1, f)
//! norms f64[n_entries]
//! metadata JSON, metadata_len bytes
//! fingerprints f32[2 · n_points · n_entries]
//! CRC-64/XZ u64 of everything above
//! ```
//!
//! `save` also writes the metadata as pretty JSON to `<path>.json`.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use crc::{Crc, Digest, CRC_64_XZ};

use super::{Dictionary, DictionaryMetadata, GridSpec, ParamTuple};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MRFD";
pub const FORMAT_MAJOR: u16 = 1;
pub const FORMAT_MINOR: u16 = 0;

static CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

struct CrcWriter<'a, W: Write> {
    inner: W,
    digest: Digest<'a, u64>,
}

impl<W: Write> CrcWriter<'_, W> {
    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.digest.update(bytes);
        self.inner.write_all(bytes)?;
        Ok(())
    }

    fn f64s(&mut self, vals: impl IntoIterator<Item = f64>) -> Result<()> {
        let mut buf = Vec::with_capacity(8192);
        for v in vals {
            buf.extend_from_slice(&v.to_le_bytes());
            if buf.len() >= 8192 {
                self.put(&buf)?;
                buf.clear();
            }
        }
        self.put(&buf)
    }
}

pub fn save(dict: &Dictionary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    dict.validate()?;
    let meta = serde_json::to_vec(&dict.metadata)?;
    let g = &dict.grid;
    let f_axis = g.f_frac.as_deref().unwrap_or(&[]);
    let mut w = CrcWriter { inner: BufWriter::new(File::create(path)?), digest: CRC64.digest() };
    w.put(MAGIC)?;
    w.put(&FORMAT_MAJOR.to_le_bytes())?;
    w.put(&FORMAT_MINOR.to_le_bytes())?;
    for n in [g.t1_ms.len(), g.t2_ms.len(), g.b1.len(), f_axis.len()] {
        w.put(&(n as u32).to_le_bytes())?;
    }
    w.put(&u32::from(g.f_frac.is_some()).to_le_bytes())?;
    for n in [dict.len(), dict.n_points(), meta.len()] {
        w.put(&(n as u64).to_le_bytes())?;
    }
    w.f64s(g.t1_ms.iter().chain(&g.t2_ms).chain(&g.b1).chain(f_axis).copied())?;
    w.f64s(dict.params.iter().flat_map(|p| [p.t1_ms, p.t2_ms, p.b1, p.f_frac]))?;
    w.f64s(dict.norms.iter().copied())?;
    w.put(&meta)?;
    let mut buf = Vec::with_capacity(1 << 16);
    for chunk in dict.entries.chunks(1 << 14) {
        buf.clear();
        buf.extend(chunk.iter().flat_map(|v| v.to_le_bytes()));
        w.put(&buf)?;
    }
    let crc = w.digest.finalize();
    w.inner.write_all(&crc.to_le_bytes())?;
    w.inner.flush()?;
    let mut side = serde_json::to_string_pretty(&dict.metadata)?;
    side.push('\n');
    std::fs::write(sidecar_path(path), side)?;
    Ok(())
}

struct CrcReader<'a, R: Read> {
    inner: R,
    digest: Digest<'a, u64>,
}

impl<R: Read> CrcReader<'_, R> {
    fn take(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => Error::Truncated(format!("file ends inside {what}")),
            _ => Error::Io(e),
        })?;
        self.digest.update(buf);
        Ok(())
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let mut b = [0u8; 2];
        self.take(&mut b, what)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.take(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.take(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n);
        let mut buf = vec![0u8; 8192];
        let mut left = n;
        while left > 0 {
            let k = left.min(1024);
            self.take(&mut buf[..8 * k], what)?;
            out.extend(buf[..8 * k].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())));
            left -= k;
        }
        Ok(out)
    }
}

/// Upper bound on any count read from a header, to fail early on garbage.
const MAX_COUNT: u64 = 1 << 40;

pub fn load(path: impl AsRef<Path>) -> Result<Dictionary> {
    let file = File::open(path.as_ref())?;
    let file_len = file.metadata()?.len();
    let mut r = CrcReader { inner: BufReader::with_capacity(1 << 20, file), digest: CRC64.digest() };
    let mut magic = [0u8; 4];
    r.take(&mut magic, "header")?;
    if &magic != MAGIC {
        return Err(Error::Format("not a dictionary file (bad magic)".into()));
    }
    let major = r.u16("header")?;
    let _minor = r.u16("header")?;
    if major != FORMAT_MAJOR {
        return Err(Error::Version { found: major, supported: FORMAT_MAJOR });
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = r.u32("header")? as usize;
    }
    let flags = r.u32("header")?;
    let n_entries = r.u64("header")?;
    let n_points = r.u64("header")?;
    let meta_len = r.u64("header")?;
    if n_entries > MAX_COUNT || n_points > MAX_COUNT || meta_len > MAX_COUNT {
        return Err(Error::Format("implausible header counts".into()));
    }
    let axes_len = dims.iter().sum::<usize>() as u64;
    let expected = 52 + 8 * (axes_len + 5 * n_entries) + meta_len + 8 * n_entries * n_points + 8;
    if file_len < expected {
        return Err(Error::Truncated(format!("{file_len} bytes, header implies {expected}")));
    }
    if file_len > expected {
        return Err(Error::Format(format!("{} trailing bytes", file_len - expected)));
    }
    let (n_entries, n_points) = (n_entries as usize, n_points as usize);

    let axes = r.f64s(axes_len as usize, "axis tables")?;
    let mut it = axes.into_iter();
    let mut next_axis = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
    let t1_ms = next_axis(dims[0]);
    let t2_ms = next_axis(dims[1]);
    let b1 = next_axis(dims[2]);
    let f = next_axis(dims[3]);
    let grid = GridSpec { t1_ms, t2_ms, b1, f_frac: (flags & 1 == 1).then_some(f) };

    let params = r
        .f64s(4 * n_entries, "parameter table")?
        .chunks_exact(4)
        .map(|c| ParamTuple { t1_ms: c[0], t2_ms: c[1], b1: c[2], f_frac: c[3] })
        .collect();
    let norms = r.f64s(n_entries, "norm table")?;
    let mut meta = vec![0u8; meta_len as usize];
    r.take(&mut meta, "metadata")?;

    let total = 2 * n_points * n_entries;
    let mut entries = Vec::with_capacity(total);
    let mut buf = vec![0u8; 1 << 16];
    let mut left = total;
    while left > 0 {
        let k = left.min(1 << 14);
        r.take(&mut buf[..4 * k], "fingerprints")?;
        entries.extend(buf[..4 * k].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())));
        left -= k;
    }
    let computed = r.digest.finalize();
    let mut tail = [0u8; 8];
    r.inner.read_exact(&mut tail).map_err(|_| Error::Truncated("missing checksum".into()))?;
    let stored = u64::from_le_bytes(tail);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let metadata: DictionaryMetadata = serde_json::from_slice(&meta)?;
    let dict = Dictionary { grid, params, entries, norms, metadata };
    dict.validate()?;
    Ok(dict)
}

#[cfg(test)]
mod tests {
    use super::super::tests::tiny;
    use super::*;
    use crate::dictionary::DictionaryKind;

    fn file_hash(path: &Path) -> Vec<u8> {
        use sha2::{Digest as _, Sha256};
        Sha256::digest(std::fs::read(path).unwrap()).to_vec()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        for kind in DictionaryKind::ALL {
            let d = tiny(kind, 1);
            let p = dir.path().join(format!("{}.mrfd", kind.name()));
            save(&d, &p).unwrap();
            let back = load(&p).unwrap();
            assert_eq!(back, d);
            let p2 = dir.path().join("again.mrfd");
            save(&back, &p2).unwrap();
            assert_eq!(file_hash(&p), file_hash(&p2));
            let side: DictionaryMetadata =
                serde_json::from_str(&std::fs::read_to_string(sidecar_path(&p)).unwrap()).unwrap();
            assert_eq!(side, d.metadata);
        }
    }

    #[test]
    fn computed_profile_round_trips() {
        use crate::dictionary::{generate, GenerateSettings, GridSpec};
        use crate::sequence::{build_irff, compute_slice_profile, ScheduleConfig};
        let kind = DictionaryKind::TwoPoolIrffMt;
        let sched = build_irff(&ScheduleConfig::irff_with_length(10, true), true).unwrap();
        let profile = compute_slice_profile(sched.excitation_waveform(), sched.max_flip_deg(), 16).unwrap();
        let d = generate(&sched, &GridSpec::with_sizes(kind, 2, 2, 1, 1), &profile, &GenerateSettings::new(kind)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.mrfd");
        save(&d, &p).unwrap();
        assert_eq!(load(&p).unwrap(), d);
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.mrfd");
        save(&tiny(DictionaryKind::TwoPoolIrff, 1), &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        for pos in [60, bytes.len() / 2, bytes.len() - 9] {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x10;
            std::fs::write(&p, &bad).unwrap();
            assert!(matches!(load(&p), Err(Error::Checksum { .. })), "byte {pos}");
        }
    }

    #[test]
    fn truncation_and_version_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.mrfd");
        save(&tiny(DictionaryKind::SinglePoolIrff, 1), &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        for cut in [3, 30, bytes.len() - 1] {
            std::fs::write(&p, &bytes[..cut]).unwrap();
            assert!(matches!(load(&p), Err(Error::Truncated(_))), "cut {cut}");
        }
        let mut newer = bytes.clone();
        newer[4..6].copy_from_slice(&(FORMAT_MAJOR + 1).to_le_bytes());
        std::fs::write(&p, &newer).unwrap();
        assert!(matches!(load(&p), Err(Error::Version { found, .. }) if found == FORMAT_MAJOR + 1));
        let mut junk = bytes.clone();
        junk[0] = b'X';
        std::fs::write(&p, &junk).unwrap();
        assert!(matches!(load(&p), Err(Error::Format(_))));
    }

    #[test]
    fn thread_count_independent_files() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.mrfd"), dir.path().join("b.mrfd"));
        save(&tiny(DictionaryKind::TwoPoolIrffMt, 1), &a).unwrap();
        save(&tiny(DictionaryKind::TwoPoolIrffMt, 4), &b).unwrap();
        assert_eq!(file_hash(&a), file_hash(&b));
    }
}
