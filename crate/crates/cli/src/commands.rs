//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::Value;

use mtmrf::analysis::{
    noise_recovery, phantom_report, roi_table, sensitivity_grid, separation_study, NoiseSpec, Sample,
    SensitivityConfig, SeparationConfig, StudyReport,
};
use mtmrf::dictionary::{
    self, build_grid, generate, Dictionary, DictionaryKind, GenerateSettings, GridSpec, ParamTuple, Precision,
};
use mtmrf::matcher::{match_volume, MatchMode, ParameterMaps, Volume};
use mtmrf::sequence::{
    build_irff, compute_slice_profile, Schedule, ScheduleConfig, SequenceKind, SliceProfile,
};

use crate::args::{DictArgs, MatchArgs, ScheduleArgs, StudyArgs};
use crate::output::{file_sha256, CliError, RunProvenance};

/// Dictionaries above this in-memory size need `--confirm-large`.
const MEMORY_GUARD_BYTES: f64 = 4.0 * (1u64 << 30) as f64;

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::usage(format!("missing --{flag}")))
}

fn sequence_kind(s: &str) -> Result<SequenceKind, CliError> {
    match s {
        "irff" => Ok(SequenceKind::Irff),
        "irff-mt" => Ok(SequenceKind::IrffMt),
        _ => Err(CliError::usage(format!("unknown sequence kind '{s}' (irff | irff-mt)"))),
    }
}

fn kind_name(k: SequenceKind) -> &'static str {
    match k {
        SequenceKind::Irff => "irff",
        SequenceKind::IrffMt => "irff-mt",
    }
}

fn has_mt(cfg: &ScheduleConfig) -> bool {
    cfg.gaps.iter().any(|g| g.mt_pulse.is_some())
}

/// Schedule configuration from a file or the defaults, normalized to `kind`.
fn schedule_config(
    kind: Option<&str>,
    file: Option<&Path>,
    pulses: Option<usize>,
) -> Result<(SequenceKind, ScheduleConfig), CliError> {
    let mut cfg = match file {
        Some(p) => ScheduleConfig::load(p)?,
        None => ScheduleConfig::irff_with_length(pulses.unwrap_or(350), true),
    };
    let kind = match kind {
        Some(k) => sequence_kind(k)?,
        None if file.is_some() && !has_mt(&cfg) => SequenceKind::Irff,
        None => SequenceKind::IrffMt,
    };
    if !kind.has_mt_pulses() {
        for g in &mut cfg.gaps {
            g.mt_pulse = None;
        }
    }
    cfg.validate()?;
    Ok((kind, cfg))
}

fn load_schedule(kind: SequenceKind, file: Option<&Path>) -> Result<Schedule, CliError> {
    let (kind, cfg) = schedule_config(Some(kind_name(kind)), file, None)?;
    Ok(build_irff(&cfg, kind.has_mt_pulses())?)
}

pub fn schedule(a: &ScheduleArgs, config: Value) -> Result<(), CliError> {
    let (kind, cfg) = schedule_config(a.kind.as_deref(), a.schedule.as_deref(), a.pulses)?;
    let sched = build_irff(&cfg, kind.has_mt_pulses())?;
    println!("kind: {}", kind_name(kind));
    println!("slots: {}", sched.slots.len());
    println!("segments: {}", sched.segments.len());
    println!("readouts: {}", sched.total_readouts);
    println!("mt_pulses: {}", sched.mt_pulse_count());
    println!("schedule_hash: {}", sched.hash());
    if let Some(out) = &a.out {
        cfg.save(out)?;
        let mut prov = RunProvenance::new("schedule", config);
        prov.schedule_hashes.push(sched.hash());
        prov.write_sidecar(out)?;
        println!("written: {}", out.display());
    }
    Ok(())
}

fn dictionary_kind(model: &str, seq: SequenceKind) -> Result<DictionaryKind, CliError> {
    match (model, seq) {
        ("single-pool", SequenceKind::Irff) => Ok(DictionaryKind::SinglePoolIrff),
        ("two-pool", SequenceKind::Irff) => Ok(DictionaryKind::TwoPoolIrff),
        ("two-pool", SequenceKind::IrffMt) => Ok(DictionaryKind::TwoPoolIrffMt),
        ("single-pool", SequenceKind::IrffMt) => {
            Err(CliError::usage("the single-pool model has no dictionary for irff-mt (no bound pool to saturate)"))
        }
        _ => Err(CliError::usage(format!("unknown model '{model}' (single-pool | two-pool)"))),
    }
}

fn profile_for(schedule: &Schedule, bins: usize) -> Result<SliceProfile, CliError> {
    Ok(if bins == 0 {
        SliceProfile::uniform(1)
    } else {
        compute_slice_profile(schedule.excitation_waveform(), schedule.max_flip_deg(), bins)?
    })
}

pub fn dict(a: &DictArgs, config: Value) -> Result<(), CliError> {
    let out = required(&a.out, "out")?;
    let (seq, cfg) = schedule_config(a.kind.as_deref(), a.schedule.as_deref(), a.pulses)?;
    let kind = dictionary_kind(a.model.as_deref().unwrap_or("two-pool"), seq)?;
    let schedule = build_irff(&cfg, seq.has_mt_pulses())?;
    let scale = a.scale.as_deref().unwrap_or("desk");
    let base = match scale {
        "desk" => (20, 20, 11, 7),
        "full" => (70, 70, 41, 15),
        _ => return Err(CliError::usage(format!("unknown scale '{scale}' (desk | full)"))),
    };
    let grid = GridSpec::with_sizes(
        kind,
        a.grid_t1.unwrap_or(base.0),
        a.grid_t2.unwrap_or(base.1),
        a.grid_b1.unwrap_or(base.2),
        a.grid_f.unwrap_or(base.3),
    );
    let n_entries = build_grid(kind, &grid)?.len();
    let bytes = n_entries as f64 * (schedule.total_readouts as f64 * 8.0 + 40.0);
    if scale == "full" || bytes > MEMORY_GUARD_BYTES {
        println!("memory_estimate_gb: {:.1}", bytes / 1e9);
        if !a.confirm_large {
            return Err(CliError {
                kind: "memory_guard",
                message: format!(
                    "{n_entries} entries need about {:.1} GB; rerun with --confirm-large to proceed",
                    bytes / 1e9
                ),
                code: 2,
            });
        }
    }
    let profile = profile_for(&schedule, a.profile_bins.unwrap_or(mtmrf::sequence::DEFAULT_PROFILE_BINS))?;
    let mut settings = GenerateSettings::new(kind);
    settings.threads = a.threads.unwrap_or(0);
    settings.simulation.max_order = a.max_order;
    settings.precision = match a.precision.as_deref().unwrap_or("f32") {
        "f32" => Precision::F32,
        "f64" => Precision::F64,
        p => return Err(CliError::usage(format!("unknown precision '{p}' (f32 | f64)"))),
    };
    let t = Instant::now();
    let d = generate(&schedule, &grid, &profile, &settings)?;
    let seconds = t.elapsed().as_secs_f64();
    dictionary::save(&d, out)?;
    let mut prov = RunProvenance::new("dict", config);
    prov.schedule_hashes.push(schedule.hash());
    prov.dictionary_hashes.push(d.content_hash());
    prov.write_sidecar(out)?;
    println!("kind: {}", kind.name());
    println!("entries: {}", d.len());
    println!("points: {}", d.n_points());
    println!("seconds: {seconds:.2}");
    println!("file_sha256: {}", file_sha256(out)?);
    println!("content_hash: {}", d.content_hash());
    Ok(())
}

fn is_csv(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn match_mode(s: Option<&str>) -> Result<MatchMode, CliError> {
    Ok(s.unwrap_or("complex").parse()?)
}

pub fn match_cmd(a: &MatchArgs, config: Value) -> Result<(), CliError> {
    let dict_path = required(&a.dict, "dict")?;
    let input = required(&a.input, "in")?;
    let out = required(&a.out, "out")?;
    let mode = match_mode(a.mode.as_deref())?;
    let csv_out = match a.format.as_deref() {
        Some("csv") => true,
        Some("binary") => false,
        Some(f) => return Err(CliError::usage(format!("unknown format '{f}' (csv | binary)"))),
        None => is_csv(out),
    };
    let dict = dictionary::load(dict_path)?;
    let volume = if is_csv(input) { Volume::load_csv(input)? } else { Volume::load(input)? };
    let t = Instant::now();
    let maps = match_volume(&volume, &dict, mode, a.threads.unwrap_or(0))?;
    let seconds = t.elapsed().as_secs_f64();
    log::info!("matched {} voxels in {seconds:.2} s", volume.n_voxels());
    let mut prov = RunProvenance::new("match", config);
    prov.schedule_hashes.push(dict.metadata.schedule_hash.clone());
    prov.dictionary_hashes.push(dict.content_hash());
    if csv_out {
        maps.save_csv(out, &[format!("provenance: {}", prov.to_value())])?;
    } else {
        maps.save(out, volume.schedule_hash.clone(), prov.to_value())?;
    }
    prov.write_sidecar(out)?;
    for (i, msg) in &maps.failures {
        log::warn!("voxel {i}: {msg}");
    }
    println!("voxels: {}", volume.n_voxels());
    println!("failed: {}", maps.failures.len());
    println!("seconds: {seconds:.3}");
    Ok(())
}

fn parse_list(s: &str, n: usize, flag: &str) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::usage(format!("--{flag} expects {n} comma-separated numbers")))?;
    if v.len() != n {
        return Err(CliError::usage(format!("--{flag} expects {n} comma-separated numbers")));
    }
    Ok(v)
}

struct Loaded {
    dicts: Vec<Dictionary>,
    schedules: Vec<Schedule>,
}

fn load_dicts(a: &StudyArgs) -> Result<Loaded, CliError> {
    if a.dict.is_empty() {
        return Err(CliError::usage("missing --dict"));
    }
    let mut dicts = Vec::new();
    let mut schedules = Vec::new();
    for p in &a.dict {
        let d = dictionary::load(p)?;
        let seq = d.metadata.kind.sequence();
        let file: Option<&PathBuf> = match seq {
            SequenceKind::Irff => a.schedule_irff.as_ref(),
            SequenceKind::IrffMt => a.schedule_irff_mt.as_ref(),
        };
        schedules.push(load_schedule(seq, file.map(PathBuf::as_path))?);
        dicts.push(d);
    }
    Ok(Loaded { dicts, schedules })
}

fn find(l: &Loaded, kind: DictionaryKind) -> Result<(&Dictionary, &Schedule), CliError> {
    l.dicts
        .iter()
        .zip(&l.schedules)
        .find(|(d, _)| d.metadata.kind == kind)
        .ok_or_else(|| CliError::usage(format!("study needs a {} dictionary", kind.name())))
}

fn only(l: &Loaded) -> Result<(&Dictionary, &Schedule), CliError> {
    if l.dicts.len() != 1 {
        return Err(CliError::usage("study needs exactly one --dict"));
    }
    Ok((&l.dicts[0], &l.schedules[0]))
}

fn read_labels(path: &Path) -> Result<Vec<i64>, CliError> {
    let mut reader = csv_reader(path)?;
    let headers = reader.headers().map_err(|e| CliError::usage(e.to_string()))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| CliError::usage("labels file needs a 'label' column"))?;
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| CliError::usage(e.to_string()))?;
            r[col].trim().parse::<i64>().map_err(|_| CliError::usage(format!("bad label '{}'", &r[col])))
        })
        .collect()
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn study(a: &StudyArgs, config: Value) -> Result<(), CliError> {
    let name = required(&a.study, "study")?.as_str();
    let out = required(&a.out, "out")?;
    let threads = a.threads.unwrap_or(0);
    let mode = match_mode(a.mode.as_deref())?;
    let seed = a.seed.unwrap_or(0);
    let mut report: StudyReport = match name {
        "phantom" => {
            let l = load_dicts(a)?;
            let pairs: Vec<_> = l.dicts.iter().zip(&l.schedules).collect();
            let tissue = l.dicts[0].metadata.tissue;
            let noise = a.snr.map(|snr_db| NoiseSpec { snr_db, seed });
            let r = phantom_report(&[Sample::water(), Sample::bsa()], &pairs, &tissue, mode, noise, threads)?;
            r.report()
        }
        "sensitivity" => {
            let l = load_dicts(a)?;
            let (d, s) = only(&l)?;
            let mut cfg = SensitivityConfig::default();
            cfg.n_t2ss = a.grid_t2ss.unwrap_or(cfg.n_t2ss);
            cfg.n_k = a.grid_k.unwrap_or(cfg.n_k);
            if let Some(r) = &a.t2ss_range {
                let v = parse_list(r, 2, "t2ss-range")?;
                cfg.t2ss_range_us = (v[0], v[1]);
            }
            if let Some(r) = &a.k_range {
                let v = parse_list(r, 2, "k-range")?;
                cfg.k_range_per_s = (v[0], v[1]);
            }
            if let Some(t) = &a.truth {
                let v = parse_list(t, 4, "truth")?;
                cfg.truth = ParamTuple { t1_ms: v[0], t2_ms: v[1], b1: v[2], f_frac: v[3] };
            }
            sensitivity_grid(&cfg, d, s, mode, threads)?.report()
        }
        "separation" => {
            let l = load_dicts(a)?;
            let cfg = SeparationConfig { n_trials: a.trials.unwrap_or(500), snr_db: a.snr, seed };
            let irff = find(&l, DictionaryKind::TwoPoolIrff)?;
            let irff_mt = find(&l, DictionaryKind::TwoPoolIrffMt)?;
            separation_study(&cfg, irff, irff_mt, mode, threads)?.report()
        }
        "recovery" => {
            let l = load_dicts(a)?;
            let (d, _) = only(&l)?;
            let snr = a.snr.ok_or_else(|| CliError::usage("recovery study needs --snr"))?;
            noise_recovery(d, a.samples.unwrap_or(2000), snr, seed, mode, threads)?.report()
        }
        "roi" => {
            let input = required(&a.input, "in")?;
            let maps = if is_csv(input) { ParameterMaps::load_csv(input)? } else { ParameterMaps::load(input)? };
            let labels = read_labels(required(&a.labels, "labels")?)?;
            let channels: Vec<&str> = a.channels.as_deref().unwrap_or("t1,t2,f").split(',').map(str::trim).collect();
            roi_table(&maps, &labels, &channels, Default::default())?
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown study '{other}' (phantom | sensitivity | separation | recovery | roi)"
            )))
        }
    };
    let mut prov = RunProvenance::new("study", config);
    prov.schedule_hashes = report.provenance.schedule_hashes.clone();
    prov.dictionary_hashes = report.provenance.dictionary_hashes.clone();
    report.provenance.config = prov.to_value();
    report.save_csv(out)?;
    prov.write_sidecar(out)?;
    println!("study: {}", report.study);
    println!("rows: {}", report.rows.len());
    for (k, v) in &report.summary {
        println!("{k}: {v}");
    }
    Ok(())
}
