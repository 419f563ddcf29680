use std::collections::BTreeMap;

use num_complex::Complex;
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    add_noise, case_rng, check_pair, fmt, grid_steps, pool, within_one_step, NoiseSpec, Provenance,
    StudyReport,
};
use crate::dictionary::{linear_axis, Dictionary, DictionaryKind, FixedTissue, ParamTuple};
use crate::epgx::TwoPoolParams;
use crate::error::{Error, Result};
use crate::matcher::{MatchMode, MatchResult, Matcher};
use crate::sequence::{Schedule, SignalModel, Simulator};

const PARAM_NAMES: [&str; 4] = ["t1", "t2", "b1", "f"];

fn truth_simulator(dict: &Dictionary, schedule: &Schedule) -> Result<Simulator> {
    check_pair(dict, schedule)?;
    Simulator::new(schedule, &dict.metadata.profile, dict.simulation_options())
}

/// Two-pool ground-truth fingerprint in double precision.
fn simulate_truth(sim: &Simulator, tissue: &TwoPoolParams, b1: f64) -> Result<Vec<Complex<f64>>> {
    sim.run::<f64>(tissue, b1, SignalModel::TwoPool)
}

fn estimate(r: &MatchResult) -> ParamTuple {
    ParamTuple { t1_ms: r.t1_ms, t2_ms: r.t2_ms, b1: r.b1_scale, f_frac: r.f_frac }
}

fn tuple_values(p: &ParamTuple) -> [f64; 4] {
    [p.t1_ms, p.t2_ms, p.b1, p.f_frac]
}

/// A phantom sample with known two-pool parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub name: String,
    pub truth: ParamTuple,
}

impl Sample {
    /// Doped water: no semi-solid pool.
    pub fn water() -> Self {
        Self { name: "water".into(), truth: ParamTuple { t1_ms: 648.0, t2_ms: 29.0, b1: 0.98, f_frac: 0.0 } }
    }

    /// Cross-linked bovine serum albumin.
    pub fn bsa() -> Self {
        Self { name: "bsa".into(), truth: ParamTuple { t1_ms: 1056.0, t2_ms: 51.0, b1: 0.98, f_frac: 0.14 } }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomCell {
    pub sample: String,
    pub kind: DictionaryKind,
    pub truth: ParamTuple,
    pub result: MatchResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomReport {
    pub cells: Vec<PhantomCell>,
    pub provenance: Provenance,
}

impl PhantomReport {
    pub fn cell(&self, sample: &str, kind: DictionaryKind) -> Option<&PhantomCell> {
        self.cells.iter().find(|c| c.sample == sample && c.kind == kind)
    }

    pub fn report(&self) -> StudyReport {
        let mut columns = vec!["sample".to_string(), "dictionary".to_string()];
        for prefix in ["truth", "est"] {
            columns.extend(PARAM_NAMES.iter().map(|p| format!("{prefix}_{p}")));
        }
        columns.extend(["pd_abs", "nrmse"].map(String::from));
        let mut summary = BTreeMap::new();
        let rows = self
            .cells
            .iter()
            .map(|c| {
                summary.insert(format!("nrmse.{}.{}", c.sample, c.kind.name()), c.result.nrmse);
                let mut row = vec![c.sample.clone(), c.kind.name().to_string()];
                row.extend(tuple_values(&c.truth).map(fmt));
                row.extend(tuple_values(&estimate(&c.result)).map(fmt));
                row.extend([fmt(c.result.pd.norm()), fmt(c.result.nrmse)]);
                row
            })
            .collect();
        StudyReport { study: "phantom".into(), columns, rows, summary, provenance: self.provenance.clone() }
    }
}

/// Simulates every sample under each dictionary's schedule with the two-pool
/// model and matches it against that dictionary.
pub fn phantom_report(
    samples: &[Sample],
    dicts: &[(&Dictionary, &Schedule)],
    tissue: &FixedTissue,
    mode: MatchMode,
    noise: Option<NoiseSpec>,
    threads: usize,
) -> Result<PhantomReport> {
    let sims = dicts.iter().map(|(d, s)| truth_simulator(d, s)).collect::<Result<Vec<_>>>()?;
    let cases: Vec<(usize, usize)> = (0..dicts.len()).flat_map(|d| (0..samples.len()).map(move |s| (d, s))).collect();
    let cells = pool(threads)?.install(|| {
        cases
            .par_iter()
            .enumerate()
            .map(|(case, &(d, s))| {
                let sample = &samples[s];
                let mut signal = simulate_truth(&sims[d], &tissue.params(&sample.truth), sample.truth.b1)?;
                if let Some(n) = noise {
                    add_noise(&mut signal, n.snr_db, &mut case_rng(n.seed, case as u64))?;
                }
                let dict = dicts[d].0;
                let result = Matcher::new(dict, mode).match_one(&signal)?;
                Ok(PhantomCell { sample: sample.name.clone(), kind: dict.metadata.kind, truth: sample.truth, result })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let schedules: Vec<&Schedule> = dicts.iter().map(|p| p.1).collect();
    let dict_refs: Vec<&Dictionary> = dicts.iter().map(|p| p.0).collect();
    let config = serde_json::json!({ "samples": samples, "tissue": tissue, "mode": mode, "noise": noise });
    let provenance = Provenance::new(noise.map(|n| n.seed), &schedules, &dict_refs, config);
    Ok(PhantomReport { cells, provenance })
}

/// Grid of true exchange rates and semi-solid T2 values, matched against a
/// dictionary that assumes fixed values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityConfig {
    pub n_t2ss: usize,
    pub n_k: usize,
    pub t2ss_range_us: (f64, f64),
    pub k_range_per_s: (f64, f64),
    pub truth: ParamTuple,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            n_t2ss: 32,
            n_k: 32,
            t2ss_range_us: (5.0, 20.0),
            k_range_per_s: (1.0, 10.0),
            truth: ParamTuple { t1_ms: 800.0, t2_ms: 60.0, b1: 1.0, f_frac: 0.10 },
        }
    }
}

impl SensitivityConfig {
    pub fn t2ss_axis(&self) -> Vec<f64> {
        linear_axis(self.t2ss_range_us.0, self.t2ss_range_us.1, self.n_t2ss)
    }

    pub fn k_axis(&self) -> Vec<f64> {
        linear_axis(self.k_range_per_s.0, self.k_range_per_s.1, self.n_k)
    }

    fn validate(&self, assumed: &FixedTissue) -> Result<()> {
        if self.n_t2ss == 0 || self.n_k == 0 {
            return Err(Error::Config("sensitivity grid needs at least one cell per axis".into()));
        }
        for (name, (lo, hi), v) in [
            ("t2ss", self.t2ss_range_us, assumed.t2ss_us),
            ("k", self.k_range_per_s, assumed.k_per_s),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(Error::Config(format!("invalid {name} range ({lo}, {hi})")));
            }
            if v < lo || v > hi {
                return Err(Error::Config(format!("{name} range ({lo}, {hi}) excludes the assumed value {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCell {
    pub t2ss_us: f64,
    pub k_per_s: f64,
    pub result: MatchResult,
    /// Estimate minus truth for T1, T2, B1, F.
    pub error: [f64; 4],
    /// Distance from truth in grid steps per axis.
    pub steps: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub config: SensitivityConfig,
    /// Row-major, semi-solid T2 outer, exchange rate inner.
    pub cells: Vec<SensitivityCell>,
    /// The cell at the dictionary's assumed values.
    pub assumed: SensitivityCell,
    pub provenance: Provenance,
}

impl SensitivityReport {
    /// `(min, max)` of the error of parameter `p` (0 = T1 .. 3 = F) over the grid.
    pub fn error_range(&self, p: usize) -> (f64, f64) {
        self.cells.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.error[p]), hi.max(c.error[p])))
    }

    pub fn report(&self) -> StudyReport {
        let mut columns = vec!["t2ss_us".to_string(), "k_per_s".to_string()];
        columns.extend(PARAM_NAMES.iter().map(|p| format!("est_{p}")));
        columns.extend(PARAM_NAMES.iter().map(|p| format!("err_{p}")));
        columns.push("nrmse".into());
        let row = |c: &SensitivityCell| {
            let mut r = vec![fmt(c.t2ss_us), fmt(c.k_per_s)];
            r.extend(tuple_values(&estimate(&c.result)).map(fmt));
            r.extend(c.error.map(fmt));
            r.push(fmt(c.result.nrmse));
            r
        };
        let mut summary = BTreeMap::new();
        for (p, name) in PARAM_NAMES.iter().enumerate() {
            let (lo, hi) = self.error_range(p);
            summary.insert(format!("err_{name}.min"), lo);
            summary.insert(format!("err_{name}.max"), hi);
            summary.insert(format!("assumed.err_{name}"), self.assumed.error[p]);
            summary.insert(format!("assumed.steps_{name}"), self.assumed.steps[p]);
        }
        StudyReport {
            study: "sensitivity".into(),
            columns,
            rows: self.cells.iter().map(row).collect(),
            summary,
            provenance: self.provenance.clone(),
        }
    }
}

/// Simulates the truth for every (T2ss, k) cell plus the assumed point and
/// matches each against `dict`.
pub fn sensitivity_grid(
    cfg: &SensitivityConfig,
    dict: &Dictionary,
    schedule: &Schedule,
    mode: MatchMode,
    threads: usize,
) -> Result<SensitivityReport> {
    let assumed = dict.metadata.tissue;
    if !dict.metadata.kind.has_f_axis() {
        return Err(Error::Config("sensitivity grid needs a two-pool dictionary".into()));
    }
    cfg.validate(&assumed)?;
    let sim = truth_simulator(dict, schedule)?;
    let mut points: Vec<(f64, f64)> =
        cfg.t2ss_axis().into_iter().flat_map(|t| cfg.k_axis().into_iter().map(move |k| (t, k))).collect();
    points.push((assumed.t2ss_us, assumed.k_per_s));
    let truth = cfg.truth;
    let matcher = Matcher::new(dict, mode);
    let mut cells = pool(threads)?.install(|| {
        let signals = points
            .par_iter()
            .map(|&(t2ss_us, k_per_s)| {
                let tissue = FixedTissue { k_per_s, t2ss_us, lineshape: assumed.lineshape };
                simulate_truth(&sim, &tissue.params(&truth), truth.b1)
            })
            .collect::<Result<Vec<_>>>()?;
        let results = matcher.match_many(signals.len(), |i, buf| buf.extend_from_slice(&signals[i]), 0);
        points
            .iter()
            .zip(results)
            .map(|(&(t2ss_us, k_per_s), r)| {
                let result = r?;
                let est = estimate(&result);
                let (e, t) = (tuple_values(&est), tuple_values(&truth));
                Ok(SensitivityCell {
                    t2ss_us,
                    k_per_s,
                    result,
                    error: [e[0] - t[0], e[1] - t[1], e[2] - t[2], e[3] - t[3]],
                    steps: grid_steps(&dict.grid, &truth, &est),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let assumed_cell = cells.pop().expect("assumed point appended");
    let provenance = Provenance::new(None, &[schedule], &[dict], serde_json::to_value(cfg)?);
    Ok(SensitivityReport { config: cfg.clone(), cells, assumed: assumed_cell, provenance })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    pub n_trials: usize,
    /// `None` leaves the fingerprints noiseless.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationTrial {
    pub truth: ParamTuple,
    pub f_irff: f64,
    pub f_irff_mt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub config: SeparationConfig,
    pub trials: Vec<SeparationTrial>,
    /// Fraction of trials matched with F > 0 without MT pulses.
    pub rate_irff: f64,
    /// Same, with MT pulses.
    pub rate_irff_mt: f64,
    pub provenance: Provenance,
}

impl SeparationReport {
    pub fn report(&self) -> StudyReport {
        let columns = ["t1", "t2", "b1", "f_irff", "f_irff_mt"].map(String::from).to_vec();
        let rows = self
            .trials
            .iter()
            .map(|t| [t.truth.t1_ms, t.truth.t2_ms, t.truth.b1, t.f_irff, t.f_irff_mt].map(fmt).to_vec())
            .collect();
        let summary = BTreeMap::from([("rate_irff".to_string(), self.rate_irff), ("rate_irff_mt".to_string(), self.rate_irff_mt)]);
        StudyReport { study: "separation".into(), columns, rows, summary, provenance: self.provenance.clone() }
    }
}

/// Draws F = 0 grid tuples, simulates them under both schedules with seeded
/// noise, and counts matches that report a semi-solid pool.
pub fn separation_study(
    cfg: &SeparationConfig,
    irff: (&Dictionary, &Schedule),
    irff_mt: (&Dictionary, &Schedule),
    mode: MatchMode,
    threads: usize,
) -> Result<SeparationReport> {
    let (d0, d1) = (irff.0, irff_mt.0);
    if !d0.metadata.kind.has_f_axis() || !d1.metadata.kind.has_f_axis() {
        return Err(Error::Config("separation study needs two-pool dictionaries".into()));
    }
    if d0.grid != d1.grid {
        return Err(Error::Config("separation study dictionaries use different grids".into()));
    }
    let sims = [truth_simulator(d0, irff.1)?, truth_simulator(d1, irff_mt.1)?];
    let water: Vec<ParamTuple> = d0.params.iter().filter(|p| p.f_frac == 0.0).copied().collect();
    if water.is_empty() {
        return Err(Error::Config("dictionary grid has no F = 0 entries".into()));
    }
    let mut rng = case_rng(cfg.seed, 0);
    let truths: Vec<ParamTuple> = (0..cfg.n_trials).map(|_| water[rng.random_range(0..water.len())]).collect();
    let tissue = d0.metadata.tissue;
    let matchers = [Matcher::new(d0, mode), Matcher::new(d1, mode)];
    let trials = pool(threads)?.install(|| {
        truths
            .par_iter()
            .enumerate()
            .map(|(t, truth)| {
                let mut f = [0.0; 2];
                for s in 0..2 {
                    let mut signal = simulate_truth(&sims[s], &tissue.params(truth), truth.b1)?;
                    if let Some(snr) = cfg.snr_db {
                        add_noise(&mut signal, snr, &mut case_rng(cfg.seed, 1 + 2 * t as u64 + s as u64))?;
                    }
                    f[s] = matchers[s].match_one(&signal)?.f_frac;
                }
                Ok(SeparationTrial { truth: *truth, f_irff: f[0], f_irff_mt: f[1] })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let rate = |g: fn(&SeparationTrial) -> f64| {
        if trials.is_empty() {
            0.0
        } else {
            trials.iter().filter(|t| g(t) > 0.0).count() as f64 / trials.len() as f64
        }
    };
    let (rate_irff, rate_irff_mt) = (rate(|t| t.f_irff), rate(|t| t.f_irff_mt));
    let provenance = Provenance::new(Some(cfg.seed), &[irff.1, irff_mt.1], &[d0, d1], serde_json::to_value(cfg)?);
    Ok(SeparationReport { config: *cfg, trials, rate_irff, rate_irff_mt, provenance })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub snr_db: f64,
    pub seed: u64,
    pub indices: Vec<usize>,
    pub steps: Vec<[f64; 4]>,
    pub recovered: Vec<bool>,
    /// Fraction of samples with every parameter within one grid step.
    pub rate: f64,
    pub provenance: Provenance,
}

impl RecoveryReport {
    pub fn report(&self) -> StudyReport {
        let mut columns = vec!["entry".to_string()];
        columns.extend(PARAM_NAMES.iter().map(|p| format!("steps_{p}")));
        columns.push("recovered".into());
        let rows = (0..self.indices.len())
            .map(|i| {
                let mut r = vec![self.indices[i].to_string()];
                r.extend(self.steps[i].map(fmt));
                r.push(self.recovered[i].to_string());
                r
            })
            .collect();
        let summary = BTreeMap::from([("rate".to_string(), self.rate)]);
        StudyReport { study: "recovery".into(), columns, rows, summary, provenance: self.provenance.clone() }
    }
}

/// Adds seeded noise to `n_samples` distinct dictionary fingerprints and
/// checks that each match lands within one grid step of its source.
pub fn noise_recovery(
    dict: &Dictionary,
    n_samples: usize,
    snr_db: f64,
    seed: u64,
    mode: MatchMode,
    threads: usize,
) -> Result<RecoveryReport> {
    if !snr_db.is_finite() {
        return Err(Error::NonFinite("snr_db"));
    }
    let mut rng = case_rng(seed, 0);
    let indices = rand::seq::index::sample(&mut rng, dict.len(), n_samples.min(dict.len())).into_vec();
    let matcher = Matcher::new(dict, mode);
    let results = pool(threads)?.install(|| {
        matcher.match_many(
            indices.len(),
            |i, buf| {
                let mut s = dict.fingerprint(indices[i]);
                // Cannot fail: the SNR is finite and fingerprints are finite.
                let _ = add_noise(&mut s, snr_db, &mut case_rng(seed, 1 + i as u64));
                buf.extend(s);
            },
            0,
        )
    });
    let mut steps = Vec::with_capacity(indices.len());
    let mut recovered = Vec::with_capacity(indices.len());
    for (&j, r) in indices.iter().zip(results) {
        let est = estimate(&r?);
        steps.push(grid_steps(&dict.grid, &dict.params[j], &est));
        recovered.push(within_one_step(&dict.grid, &dict.params[j], &est));
    }
    let rate = if indices.is_empty() { 0.0 } else { recovered.iter().filter(|&&b| b).count() as f64 / indices.len() as f64 };
    let config = serde_json::json!({ "n_samples": n_samples, "snr_db": snr_db, "mode": mode });
    let provenance = Provenance::new(Some(seed), &[], &[dict], config);
    Ok(RecoveryReport { snr_db, seed, indices, steps, recovered, rate, provenance })
}
