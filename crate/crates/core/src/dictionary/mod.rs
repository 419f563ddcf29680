//! Fingerprint dictionaries: grid construction, parallel generation and a
//! checksummed binary container.

pub mod format;
pub mod grid;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::epgx::{Lineshape, TwoPoolParams, DEFAULT_K_PER_S, DEFAULT_T2SS_US};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sequence::{Schedule, SignalModel, SimulationOptions, Simulator, SliceProfile};

pub use format::{load, save, FORMAT_MAJOR, FORMAT_MINOR};
pub use grid::{build_grid, fraction_axis, linear_axis, log_axis, DictionaryKind, GridSpec, ParamTuple};

/// Arithmetic used while simulating entries; storage is always 32-bit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

/// Tissue properties held fixed across a dictionary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedTissue {
    pub k_per_s: f64,
    pub t2ss_us: f64,
    pub lineshape: Lineshape,
}

impl Default for FixedTissue {
    fn default() -> Self {
        Self { k_per_s: DEFAULT_K_PER_S, t2ss_us: DEFAULT_T2SS_US, lineshape: Lineshape::Gaussian }
    }
}

impl FixedTissue {
    pub fn params(&self, p: &ParamTuple) -> TwoPoolParams {
        TwoPoolParams {
            t1_ms: p.t1_ms,
            t2_ms: p.t2_ms,
            f_frac: p.f_frac,
            k_per_s: self.k_per_s,
            t2ss_us: self.t2ss_us,
            lineshape: self.lineshape,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerateSettings {
    pub kind: DictionaryKind,
    pub tissue: FixedTissue,
    pub precision: Precision,
    pub simulation: SimulationOptions,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
}

impl GenerateSettings {
    pub fn new(kind: DictionaryKind) -> Self {
        Self {
            kind,
            tissue: FixedTissue::default(),
            precision: Precision::F32,
            simulation: SimulationOptions::default(),
            threads: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DictionaryMetadata {
    pub kind: DictionaryKind,
    pub model: SignalModel,
    pub schedule_hash: String,
    pub n_entries: usize,
    pub n_points: usize,
    pub tissue: FixedTissue,
    pub profile: SliceProfile,
    pub max_order: usize,
    pub ideal_spoil: bool,
    pub precision: Precision,
    pub generator: String,
    /// Reserved for compressed representations; always `None` here.
    pub compression: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    pub grid: GridSpec,
    pub params: Vec<ParamTuple>,
    /// Unit-norm fingerprints, interleaved `(re, im)`, `n_points` complex values per entry.
    pub entries: Vec<f32>,
    /// ℓ2 norm of each fingerprint before normalization.
    pub norms: Vec<f64>,
    pub metadata: DictionaryMetadata,
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn n_points(&self) -> usize {
        self.metadata.n_points
    }

    /// Interleaved `(re, im)` samples of entry `i`.
    pub fn entry(&self, i: usize) -> &[f32] {
        let w = 2 * self.n_points();
        &self.entries[i * w..(i + 1) * w]
    }

    pub fn entry_complex(&self, i: usize) -> Vec<Complex<f64>> {
        self.entry(i).chunks_exact(2).map(|c| Complex::new(c[0] as f64, c[1] as f64)).collect()
    }

    /// Un-normalized fingerprint of entry `i` (`entry × norm`).
    pub fn fingerprint(&self, i: usize) -> Vec<Complex<f64>> {
        let n = self.norms[i];
        self.entry_complex(i).into_iter().map(|v| v * n).collect()
    }

    /// Simulation options that reproduce the stored entries.
    pub fn simulation_options(&self) -> SimulationOptions {
        SimulationOptions { max_order: Some(self.metadata.max_order), ideal_spoil: self.metadata.ideal_spoil }
    }

    /// Hex SHA-256 over metadata, parameters, norms and entries.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.metadata).unwrap_or_default());
        for p in &self.params {
            for v in [p.t1_ms, p.t2_ms, p.b1, p.f_frac] {
                h.update(v.to_le_bytes());
            }
        }
        for v in &self.norms {
            h.update(v.to_le_bytes());
        }
        for v in &self.entries {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.params.len();
        let m = &self.metadata;
        if m.n_entries != n || self.norms.len() != n || self.entries.len() != n * 2 * m.n_points {
            return Err(Error::Format("dictionary tables disagree in size".into()));
        }
        Ok(())
    }
}

/// Simulates every grid tuple and stores normalized entries in row-major grid order.
pub fn generate(schedule: &Schedule, grid: &GridSpec, profile: &SliceProfile, settings: &GenerateSettings) -> Result<Dictionary> {
    let tuples = build_grid(settings.kind, grid)?;
    let sim = Simulator::new(schedule, profile, settings.simulation)?;
    let n_points = schedule.total_readouts;
    let mut entries = vec![0f32; tuples.len() * 2 * n_points];
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let model = settings.kind.model();
    let norms: Vec<Result<f64>> = pool.install(|| {
        entries
            .par_chunks_mut((2 * n_points).max(1))
            .zip(tuples.par_iter())
            .map(|(slot, p)| {
                let tissue = settings.tissue.params(p);
                match settings.precision {
                    Precision::F32 => fill_entry::<f32>(&sim, &tissue, p, model, slot),
                    Precision::F64 => fill_entry::<f64>(&sim, &tissue, p, model, slot),
                }
            })
            .collect()
    });
    let norms = norms.into_iter().collect::<Result<Vec<f64>>>()?;
    let metadata = DictionaryMetadata {
        kind: settings.kind,
        model,
        schedule_hash: schedule.hash(),
        n_entries: tuples.len(),
        n_points,
        tissue: settings.tissue,
        profile: profile.clone(),
        max_order: sim.max_order(),
        ideal_spoil: settings.simulation.ideal_spoil,
        precision: settings.precision,
        generator: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        compression: None,
    };
    Ok(Dictionary { grid: grid.clone(), params: tuples, entries, norms, metadata })
}

fn fill_entry<T: Real>(
    sim: &Simulator,
    tissue: &TwoPoolParams,
    p: &ParamTuple,
    model: SignalModel,
    slot: &mut [f32],
) -> Result<f64> {
    let series = sim.run::<T>(tissue, p.b1, model)?;
    let norm = series.iter().map(|v| v.re.as_f64().powi(2) + v.im.as_f64().powi(2)).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Simulation {
            t1_ms: p.t1_ms,
            t2_ms: p.t2_ms,
            b1: p.b1,
            f_frac: p.f_frac,
            reason: "fingerprint has zero norm".into(),
        });
    }
    for (out, v) in slot.chunks_exact_mut(2).zip(&series) {
        out[0] = (v.re.as_f64() / norm) as f32;
        out[1] = (v.im.as_f64() / norm) as f32;
    }
    Ok(norm)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::sequence::{build_irff, ScheduleConfig};

    pub(crate) fn tiny(kind: DictionaryKind, threads: usize) -> Dictionary {
        let sched = build_irff(&ScheduleConfig::irff_with_length(30, true), kind.sequence().has_mt_pulses()).unwrap();
        let grid = GridSpec::with_sizes(kind, 4, 3, 2, 2);
        let mut settings = GenerateSettings::new(kind);
        settings.threads = threads;
        generate(&sched, &grid, &SliceProfile::uniform(1), &settings).unwrap()
    }

    #[test]
    fn entries_are_unit_norm() {
        let d = tiny(DictionaryKind::TwoPoolIrffMt, 1);
        d.validate().unwrap();
        assert_eq!(d.len(), build_grid(d.metadata.kind, &d.grid).unwrap().len());
        for i in 0..d.len() {
            let n: f64 = d.entry(i).iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
            assert!(d.norms[i] > 0.0);
        }
    }

    #[test]
    fn single_tuple_grid() {
        let kind = DictionaryKind::SinglePoolIrff;
        let sched = build_irff(&ScheduleConfig::irff_with_length(10, false), false).unwrap();
        let grid = GridSpec { t1_ms: vec![800.0], t2_ms: vec![60.0], b1: vec![1.0], f_frac: None };
        let d = generate(&sched, &grid, &SliceProfile::uniform(16), &GenerateSettings::new(kind)).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.metadata.schedule_hash, sched.hash());
        assert_eq!(d.n_points(), 40);
    }

    #[test]
    fn thread_count_does_not_change_entries() {
        let a = tiny(DictionaryKind::TwoPoolIrff, 1);
        let b = tiny(DictionaryKind::TwoPoolIrff, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_norm_reports_tuple() {
        let kind = DictionaryKind::SinglePoolIrff;
        let mut cfg = ScheduleConfig::irff_with_length(5, false);
        for s in &mut cfg.segments {
            s.generator = None;
            s.flips_deg = Some(vec![0.0; 5]);
        }
        let sched = build_irff(&cfg, false).unwrap();
        let grid = GridSpec { t1_ms: vec![800.0], t2_ms: vec![60.0], b1: vec![1.0], f_frac: None };
        match generate(&sched, &grid, &SliceProfile::uniform(1), &GenerateSettings::new(kind)) {
            Err(Error::Simulation { t1_ms, .. }) => assert_eq!(t1_ms, 800.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
