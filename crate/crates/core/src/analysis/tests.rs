use super::*;
use crate::dictionary::{fraction_axis, generate, log_axis, DictionaryKind, FixedTissue, GenerateSettings};
use crate::matcher::{match_volume, MatchMode, Volume};
use crate::sequence::{build_irff, ScheduleConfig, Simulator, SliceProfile};

fn setup(kind: DictionaryKind, pulses: usize, grid: GridSpec) -> (Schedule, Dictionary) {
    let mt = kind.sequence().has_mt_pulses();
    let sched = build_irff(&ScheduleConfig::irff_with_length(pulses, mt), mt).unwrap();
    let dict = generate(&sched, &grid, &SliceProfile::uniform(1), &GenerateSettings::new(kind)).unwrap();
    (sched, dict)
}

fn small_grid(kind: DictionaryKind) -> GridSpec {
    GridSpec::with_sizes(kind, 5, 4, 3, 3)
}

#[test]
fn axis_positions() {
    let a = [1.0, 2.0, 4.0];
    assert_eq!(axis_position(&a, 2.0), 1.0);
    assert_eq!(axis_position(&a, 3.0), 1.5);
    assert_eq!(axis_position(&a, 0.5), 0.0);
    assert_eq!(axis_position(&a, 9.0), 2.0);
    assert_eq!(axis_position(&[5.0], 1.0), 0.0);
    let g = GridSpec { t1_ms: a.to_vec(), t2_ms: a.to_vec(), b1: vec![1.0], f_frac: Some(vec![0.0, 0.1, 0.2]) };
    let p = |t1, f| ParamTuple { t1_ms: t1, t2_ms: 1.0, b1: 1.0, f_frac: f };
    assert!(within_one_step(&g, &p(2.0, 0.0), &p(4.0, 0.1)));
    assert!(!within_one_step(&g, &p(1.0, 0.0), &p(4.0, 0.0)));
    assert!(!within_one_step(&g, &p(1.0, 0.0), &p(1.0, 0.2)));
    assert!(within_one_step(&g, &p(3.0, 0.15), &p(4.0, 0.2)));
    assert_eq!(grid_steps(&g, &p(3.0, 0.15), &p(1.0, 0.0)), [1.5, 0.0, 0.0, 1.5]);
}

#[test]
fn noise_level_and_determinism() {
    let clean = vec![Complex::new(1.0, -1.0); 20000];
    let mut a = clean.clone();
    let mut b = clean.clone();
    add_noise(&mut a, 20.0, &mut case_rng(7, 3)).unwrap();
    add_noise(&mut b, 20.0, &mut case_rng(7, 3)).unwrap();
    assert_eq!(a, b);
    let mut c = clean.clone();
    add_noise(&mut c, 20.0, &mut case_rng(7, 4)).unwrap();
    assert_ne!(a, c);
    let noise: f64 = a.iter().zip(&clean).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len() as f64;
    let snr = 10.0 * (2.0 / noise).log10();
    assert!((snr - 20.0).abs() < 0.1, "{snr}");
    assert!(add_noise(&mut b, f64::NAN, &mut case_rng(0, 0)).is_err());
}

#[test]
fn roi_examples() {
    let s = roi_stats(&[3.5; 6], &[1, 2, 2, 3, 3, 3]).unwrap();
    assert!(s.iter().all(|r| r.median == 3.5));
    let s = roi_stats(&[1.0, 2.0, 3.0, 10.0], &[1, 1, 1, 2]).unwrap();
    assert_eq!((s[0].label, s[0].median, s[1].label, s[1].median), (1, 2.0, 2, 10.0));
    let s = roi_stats(&[1.0, f64::NAN, 3.0, 4.0, f64::NAN], &[1, 1, 1, 1, 2]).unwrap();
    assert_eq!((s[0].count, s[0].median), (3, 3.0));
    assert!(s[1].median.is_nan());
    assert!(matches!(roi_stats(&[1.0], &[1, 2]), Err(Error::LengthMismatch { .. })));
}

#[test]
fn phantom_noiseless_self_match_and_mismatch() {
    let kind = DictionaryKind::TwoPoolIrffMt;
    let (sched, dict) = setup(kind, 40, small_grid(kind));
    let on_grid = Sample { name: "grid".into(), truth: dict.params[dict.len() / 3] };
    let r = phantom_report(&[on_grid.clone()], &[(&dict, &sched)], &FixedTissue::default(), MatchMode::Complex, None, 1)
        .unwrap();
    let c = r.cell("grid", kind).unwrap();
    assert_eq!(c.result.entry_index, dict.len() / 3);
    assert!(c.result.nrmse < 1e-5, "{}", c.result.nrmse);
    assert_eq!(r.report().rows.len(), 1);

    let other = build_irff(&ScheduleConfig::irff_with_length(41, true), true).unwrap();
    let err = phantom_report(&[on_grid], &[(&dict, &other)], &FixedTissue::default(), MatchMode::Complex, None, 1);
    assert!(matches!(err, Err(Error::ScheduleMismatch { .. })));
}

#[test]
fn sensitivity_collapsed_grid_is_self_match() {
    let kind = DictionaryKind::TwoPoolIrffMt;
    let (sched, dict) = setup(kind, 40, small_grid(kind));
    let truth = dict.params[dict.len() / 2];
    let cfg = SensitivityConfig { n_t2ss: 1, n_k: 1, t2ss_range_us: (12.0, 12.0), k_range_per_s: (4.3, 4.3), truth };
    let r = sensitivity_grid(&cfg, &dict, &sched, MatchMode::Complex, 1).unwrap();
    assert_eq!(r.cells.len(), 1);
    assert_eq!(r.cells[0].result, r.assumed.result);
    assert_eq!(r.assumed.result.entry_index, dict.len() / 2);
    assert_eq!(r.assumed.error, [0.0; 4]);

    let bad = SensitivityConfig { t2ss_range_us: (13.0, 20.0), ..cfg.clone() };
    assert!(matches!(sensitivity_grid(&bad, &dict, &sched, MatchMode::Complex, 1), Err(Error::Config(_))));
    let cfg = SensitivityConfig { n_t2ss: 3, n_k: 2, ..SensitivityConfig::default() };
    let r = sensitivity_grid(&cfg, &dict, &sched, MatchMode::Complex, 1).unwrap();
    assert_eq!(r.cells.len(), 6);
    assert_eq!((r.cells[1].t2ss_us, r.cells[1].k_per_s), (5.0, 10.0));
    assert_eq!(r.report().rows.len(), 6);
}

#[test]
fn separation_noiseless_and_deterministic() {
    let g = small_grid(DictionaryKind::TwoPoolIrff);
    let (s0, d0) = setup(DictionaryKind::TwoPoolIrff, 40, g.clone());
    let (s1, d1) = setup(DictionaryKind::TwoPoolIrffMt, 40, g);
    let cfg = SeparationConfig { n_trials: 20, snr_db: None, seed: 1 };
    let r = separation_study(&cfg, (&d0, &s0), (&d1, &s1), MatchMode::Complex, 1).unwrap();
    assert_eq!((r.rate_irff, r.rate_irff_mt), (0.0, 0.0));
    assert!(r.trials.iter().all(|t| t.truth.f_frac == 0.0));

    let cfg = SeparationConfig { n_trials: 20, snr_db: Some(20.0), seed: 9 };
    let a = separation_study(&cfg, (&d0, &s0), (&d1, &s1), MatchMode::Complex, 1).unwrap();
    let b = separation_study(&cfg, (&d0, &s0), (&d1, &s1), MatchMode::Complex, 2).unwrap();
    assert_eq!(a, b);

    let (s2, d2) = setup(DictionaryKind::TwoPoolIrffMt, 40, GridSpec::with_sizes(DictionaryKind::TwoPoolIrffMt, 5, 4, 3, 2));
    assert!(separation_study(&cfg, (&d0, &s0), (&d2, &s2), MatchMode::Complex, 1).is_err());
}

#[test]
fn recovery_high_snr_is_complete() {
    let kind = DictionaryKind::TwoPoolIrffMt;
    let (_, dict) = setup(kind, 40, small_grid(kind));
    let r = noise_recovery(&dict, 50, 80.0, 3, MatchMode::Complex, 1).unwrap();
    assert_eq!(r.rate, 1.0);
    assert_eq!(r.indices.len(), 50);
    let again = noise_recovery(&dict, 50, 80.0, 3, MatchMode::Complex, 1).unwrap();
    assert_eq!(r, again);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.csv");
    r.report().save_csv(&p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("# provenance: "));
    assert!(text.contains(&dict.content_hash()));
}

#[test]
fn roi_phantom_recovers_fraction_medians() {
    let kind = DictionaryKind::TwoPoolIrffMt;
    let grid = GridSpec {
        t1_ms: log_axis(600.0, 1400.0, 5),
        t2_ms: log_axis(40.0, 100.0, 4),
        b1: vec![0.9, 1.0, 1.1],
        f_frac: Some(fraction_axis(0.02, 0.25, 10)),
    };
    let (sched, dict) = setup(kind, 80, grid.clone());
    let sim = Simulator::new(&sched, &dict.metadata.profile, dict.simulation_options()).unwrap();
    let tissue = FixedTissue::default();
    let classes = [(1i64, ParamTuple { t1_ms: 1400.0, t2_ms: 40.0, b1: 1.0, f_frac: 0.16 }), (2, ParamTuple {
        t1_ms: 600.0 * (1400.0f64 / 600.0).powf(0.5),
        t2_ms: 100.0,
        b1: 1.0,
        f_frac: 0.10,
    })];
    let mut vol = Volume::new(Some(sched.hash()), dict.n_points());
    let mut labels = Vec::new();
    for v in 0..40 {
        let (label, truth) = classes[v % 2];
        let mut s = sim.run::<f64>(&tissue.params(&truth), truth.b1, crate::sequence::SignalModel::TwoPool).unwrap();
        add_noise(&mut s, 30.0, &mut case_rng(5, v as u64)).unwrap();
        vol.push(&s).unwrap();
        labels.push(label);
    }
    let maps = match_volume(&vol, &dict, MatchMode::Complex, 1).unwrap();
    let table = roi_table(&maps, &labels, &["t1", "f"], Provenance::default()).unwrap();
    assert_eq!(table.rows.len(), 2);
    let f_axis = grid.f_frac.as_deref().unwrap();
    for (stat, (_, truth)) in roi_stats(&maps.channel("f").unwrap(), &labels).unwrap().iter().zip(classes) {
        let steps = (axis_position(f_axis, stat.median) - axis_position(f_axis, truth.f_frac)).abs();
        assert!(steps <= 1.0, "label {} median F {} truth {}", stat.label, stat.median, truth.f_frac);
    }
}
