//! Template matching against a dictionary.

pub mod io;
mod scan;
mod subspace;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use subspace::Subspace;

pub use io::{ParameterMaps, Volume};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Complex inner product.
    #[default]
    Complex,
    /// Inner product of element-wise magnitudes.
    Magnitude,
}

impl std::str::FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complex" => Ok(MatchMode::Complex),
            "magnitude" => Ok(MatchMode::Magnitude),
            _ => Err(Error::Config(format!("unknown match mode '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub entry_index: usize,
    pub t1_ms: f64,
    pub t2_ms: f64,
    pub b1_scale: f64,
    pub f_frac: f64,
    /// Scale that maps the un-normalized entry fingerprint onto the signal.
    pub pd: Complex<f64>,
    /// `|⟨entry, signal⟩|` with the unit-norm entry.
    pub score: f64,
    pub nrmse: f64,
}

fn norm(v: &[Complex<f64>]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖s − f‖ / ‖s‖`.
pub fn nrmse(s: &[Complex<f64>], f: &[Complex<f64>]) -> Result<f64> {
    if s.len() != f.len() {
        return Err(Error::LengthMismatch { expected: s.len(), actual: f.len() });
    }
    let ns = norm(s);
    if ns == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let diff = s.iter().zip(f).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    Ok(diff / ns)
}

/// [`nrmse`] after scaling both series to unit norm and aligning the phase
/// of `f` to `s`. A zero `f` gives 1.
pub fn normalized_nrmse(s: &[Complex<f64>], f: &[Complex<f64>]) -> Result<f64> {
    if s.len() != f.len() {
        return Err(Error::LengthMismatch { expected: s.len(), actual: f.len() });
    }
    let (ns, nf) = (norm(s), norm(f));
    if ns == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let sn: Vec<Complex<f64>> = s.iter().map(|v| v / ns).collect();
    if nf == 0.0 {
        return nrmse(&sn, &vec![Complex::default(); f.len()]);
    }
    let ip: Complex<f64> = f.iter().zip(&sn).map(|(e, v)| e.conj() * v).sum();
    let rot = Complex::from_polar(1.0 / nf, ip.arg());
    let fn_: Vec<Complex<f64>> = f.iter().map(|v| v * rot).collect();
    nrmse(&sn, &fn_)
}

/// A dictionary prepared for repeated matching.
pub struct Matcher<'a> {
    dict: &'a Dictionary,
    mode: MatchMode,
    /// Norm of each stored single-precision entry, evaluated in f64.
    entry_norms: Vec<f64>,
    inv_norms: Vec<f32>,
    /// Element-wise magnitudes of the entries (magnitude mode only).
    magnitudes: Option<Vec<f32>>,
    /// Compressed entries, built on the first large complex-mode job.
    subspace: OnceLock<Subspace>,
}

/// Smallest batch that builds and uses the compressed scan.
const COMPRESS_MIN_SIGNALS: usize = 1024;

impl<'a> Matcher<'a> {
    pub fn new(dict: &'a Dictionary, mode: MatchMode) -> Self {
        let width = 2 * dict.n_points();
        let entry_norms: Vec<f64> = dict
            .entries
            .chunks_exact(width.max(1))
            .map(|e| e.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt())
            .collect();
        let inv_norms = entry_norms.iter().map(|&n| if n > 0.0 { (1.0 / n) as f32 } else { 0.0 }).collect();
        let magnitudes = (mode == MatchMode::Magnitude).then(|| {
            dict.entries.chunks_exact(2).map(|c| ((c[0] as f64).hypot(c[1] as f64)) as f32).collect()
        });
        Self { dict, mode, entry_norms, inv_norms, magnitudes, subspace: OnceLock::new() }
    }

    pub fn dictionary(&self) -> &Dictionary {
        self.dict
    }

    /// Refuses signals acquired with a different schedule.
    pub fn check_schedule(&self, schedule_hash: &str) -> Result<()> {
        if schedule_hash != self.dict.metadata.schedule_hash {
            return Err(Error::ScheduleMismatch {
                dictionary: self.dict.metadata.schedule_hash.clone(),
                query: schedule_hash.to_string(),
            });
        }
        Ok(())
    }

    pub fn match_one(&self, signal: &[Complex<f64>]) -> Result<MatchResult> {
        self.match_many(1, |_, buf| buf.extend_from_slice(signal), 1).pop().expect("one result")
    }

    /// Matches signals `0..n`, fetched on demand into the provided buffer.
    /// `threads = 0` uses the global pool. Output order follows the input.
    pub fn match_many<F>(&self, n: usize, fetch: F, threads: usize) -> Vec<Result<MatchResult>>
    where
        F: Fn(usize, &mut Vec<Complex<f64>>) + Sync,
    {
        let blocks: Vec<usize> = (0..n).step_by(scan::SIGNAL_BLOCK).collect();
        let compress = self.mode == MatchMode::Complex
            && n >= COMPRESS_MIN_SIGNALS
            && Subspace::worthwhile(self.dict.n_points(), self.dict.len());
        let run = || -> Vec<Result<MatchResult>> {
            let sub = compress.then(|| {
                self.subspace.get_or_init(|| Subspace::build(&self.dict.entries, self.dict.n_points(), &self.entry_norms))
            });
            blocks
                .par_iter()
                .flat_map_iter(|&start| self.match_block(start, (start + scan::SIGNAL_BLOCK).min(n), &fetch, sub))
                .collect()
        };
        if threads == 0 {
            run()
        } else {
            match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => pool.install(run),
                Err(e) => (0..n).map(|_| Err(Error::Config(format!("thread pool: {e}")))).collect(),
            }
        }
    }

    fn match_block<F>(&self, start: usize, end: usize, fetch: &F, sub: Option<&Subspace>) -> Vec<Result<MatchResult>>
    where
        F: Fn(usize, &mut Vec<Complex<f64>>),
    {
        let l = self.dict.n_points();
        let signals: Vec<Result<Vec<Complex<f64>>>> = (start..end)
            .map(|i| {
                let mut buf = Vec::with_capacity(l);
                fetch(i, &mut buf);
                self.validate_signal(&buf)?;
                Ok(buf)
            })
            .collect();
        let ok: Vec<usize> = (0..signals.len()).filter(|&i| signals[i].is_ok()).collect();
        let complex = self.mode == MatchMode::Complex;
        let valid = || ok.iter().map(|&i| signals[i].as_ref().expect("validated"));
        let projected = sub.map(|sp| {
            let flat: Vec<Complex<f64>> = valid().flatten().copied().collect();
            sp.project(&flat, ok.len(), l)
        });
        let slack_scale = match &projected {
            Some((_, perp)) => perp.clone(),
            None => vec![0.0; ok.len()],
        };
        let (rows_per_signal, width) = match (&projected, complex) {
            (Some(_), _) => (2, 2 * subspace::RANK),
            (None, true) => (2, 2 * l),
            (None, false) => (1, l),
        };
        let mut rows = Vec::with_capacity(ok.len() * rows_per_signal * width);
        let signal_norms = valid().map(|s| norm(s) as f32).collect();
        for (n, s) in valid().enumerate() {
            let s = match &projected {
                Some((d, _)) => &d[n * subspace::RANK..(n + 1) * subspace::RANK],
                None => s.as_slice(),
            };
            if complex {
                rows.extend(s.iter().flat_map(|v| [v.re as f32, v.im as f32]));
                rows.extend(s.iter().flat_map(|v| [v.im as f32, -v.re as f32]));
            } else {
                rows.extend(s.iter().map(|v| v.norm() as f32));
            }
        }
        let block = scan::Block { rows, signals: ok.len(), rows_per_signal, signal_norms, slack_scale };
        let cands = match sub {
            Some(sp) => scan::candidates(&block, &sp.coeffs, width, &self.inv_norms, Some(&sp.slack)),
            None => {
                let entries = self.magnitudes.as_deref().unwrap_or(&self.dict.entries);
                scan::candidates(&block, entries, width, &self.inv_norms, None)
            }
        };
        let mut cands = cands.into_iter();
        signals
            .into_iter()
            .map(|r| r.map(|s| self.refine(&s, cands.next().expect("one candidate list per valid signal"))))
            .collect()
    }

    fn validate_signal(&self, s: &[Complex<f64>]) -> Result<()> {
        if s.len() != self.dict.n_points() {
            return Err(Error::LengthMismatch { expected: self.dict.n_points(), actual: s.len() });
        }
        if s.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("signal sample"));
        }
        if norm(s) == 0.0 {
            return Err(Error::ZeroSignal);
        }
        if self.dict.is_empty() {
            return Err(Error::Config("dictionary has no entries".into()));
        }
        Ok(())
    }

    /// Exact inner product with entry `j`: complex `⟨e, s⟩`, or the real
    /// product of magnitudes.
    fn inner(&self, j: usize, s: &[Complex<f64>]) -> Complex<f64> {
        let e = self.dict.entry(j);
        match self.mode {
            MatchMode::Complex => e
                .chunks_exact(2)
                .zip(s)
                .map(|(c, v)| Complex::new(c[0] as f64, -(c[1] as f64)) * v)
                .sum(),
            MatchMode::Magnitude => {
                let re: f64 = e.chunks_exact(2).zip(s).map(|(c, v)| (c[0] as f64).hypot(c[1] as f64) * v.norm()).sum();
                Complex::new(re, 0.0)
            }
        }
    }

    fn refine(&self, s: &[Complex<f64>], cand: Option<Vec<u32>>) -> MatchResult {
        let all;
        let cand: Box<dyn Iterator<Item = usize>> = match &cand {
            Some(c) => Box::new(c.iter().map(|&j| j as usize)),
            None => {
                all = 0..self.dict.len();
                Box::new(all)
            }
        };
        let mut best: Option<(usize, f64, Complex<f64>)> = None;
        for j in cand {
            let n = self.entry_norms[j];
            if n == 0.0 {
                continue;
            }
            let ip = self.inner(j, s);
            let score = ip.norm() / n;
            let better = match best {
                None => true,
                Some((bj, bs, _)) => score > bs || (score == bs && j < bj),
            };
            if better {
                best = Some((j, score, ip));
            }
        }
        let (j, score, ip) = best.unwrap_or((0, 0.0, Complex::default()));
        let p = self.dict.params[j];
        let n = self.entry_norms[j];
        let pd = ip / (n * n * self.dict.norms[j]);
        let nrmse = match self.mode {
            MatchMode::Complex => normalized_nrmse(s, &self.dict.entry_complex(j)),
            MatchMode::Magnitude => {
                let ms: Vec<Complex<f64>> = s.iter().map(|v| Complex::new(v.norm(), 0.0)).collect();
                let me: Vec<Complex<f64>> =
                    self.dict.entry_complex(j).iter().map(|v| Complex::new(v.norm(), 0.0)).collect();
                normalized_nrmse(&ms, &me)
            }
        }
        .unwrap_or(f64::NAN);
        MatchResult {
            entry_index: j,
            t1_ms: p.t1_ms,
            t2_ms: p.t2_ms,
            b1_scale: p.b1,
            f_frac: p.f_frac,
            pd,
            score,
            nrmse,
        }
    }
}

/// Matches one signal after checking its declared schedule.
pub fn match_one(signal: &[Complex<f64>], dict: &Dictionary, mode: MatchMode, schedule_hash: &str) -> Result<MatchResult> {
    let m = Matcher::new(dict, mode);
    m.check_schedule(schedule_hash)?;
    m.match_one(signal)
}

/// Matches every voxel; voxels that cannot be matched come back as NaN rows.
pub fn match_volume(volume: &Volume, dict: &Dictionary, mode: MatchMode, threads: usize) -> Result<ParameterMaps> {
    let hash = volume
        .schedule_hash
        .as_deref()
        .ok_or_else(|| Error::Config("volume does not declare its schedule hash".into()))?;
    let m = Matcher::new(dict, mode);
    m.check_schedule(hash)?;
    if volume.n_points != dict.n_points() {
        return Err(Error::LengthMismatch { expected: dict.n_points(), actual: volume.n_points });
    }
    let results = m.match_many(volume.n_voxels(), |i, buf| buf.extend(volume.voxel(i)), threads);
    Ok(ParameterMaps::from_results(&results, volume.shape.clone()))
}
