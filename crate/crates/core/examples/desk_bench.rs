//! Times desk-scale dictionary generation and exhaustive self-matching.

use std::time::Instant;

use mtmrf::dictionary::{generate, DictionaryKind, GenerateSettings, GridSpec};
use mtmrf::matcher::{MatchMode, Matcher};
use mtmrf::sequence::{build_irff, compute_slice_profile, ScheduleConfig};

fn main() {
    let kind: DictionaryKind = std::env::args().nth(1).as_deref().unwrap_or("two_pool_irff_mt").parse().unwrap();
    let mt = kind.sequence().has_mt_pulses();
    let schedule = build_irff(&ScheduleConfig::irff(mt), mt).unwrap();
    let profile = compute_slice_profile(schedule.excitation_waveform(), schedule.max_flip_deg(), 16).unwrap();
    let t = Instant::now();
    let dict = generate(&schedule, &GridSpec::desk(kind), &profile, &GenerateSettings::new(kind)).unwrap();
    println!("generate {} entries: {:.1} s", dict.len(), t.elapsed().as_secs_f64());
    let m = Matcher::new(&dict, MatchMode::Complex);
    let t = Instant::now();
    let res = m.match_many(dict.len(), |i, buf| buf.extend(dict.fingerprint(i)), 0);
    let wrong = res.iter().enumerate().filter(|(i, r)| r.as_ref().unwrap().entry_index != *i).count();
    println!("self-match: {:.1} s, {wrong} mismatches", t.elapsed().as_secs_f64());
}
