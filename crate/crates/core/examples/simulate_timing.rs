//! Times fingerprint simulation for the default IRFF-MT schedule.

use std::time::Instant;

use mtmrf::epgx::TwoPoolParams;
use mtmrf::sequence::{build_irff, compute_slice_profile, ScheduleConfig, SignalModel, SimulationOptions, Simulator};
use mtmrf::waveform::RfWaveform;

fn main() {
    let schedule = build_irff(&ScheduleConfig::irff(true), true).unwrap();
    let profile = compute_slice_profile(RfWaveform::WindowedSinc, schedule.max_flip_deg(), 16).unwrap();
    let sim = Simulator::new(&schedule, &profile, SimulationOptions::default()).unwrap();
    let reps = 10;
    for (t1, t2) in [(800.0, 60.0), (100.0, 15.0), (4300.0, 15.0), (4300.0, 430.0)] {
    let tissue = TwoPoolParams::new(t1, t2, 0.1);
    println!("T1 {t1} T2 {t2}");
    for model in [SignalModel::SinglePool, SignalModel::TwoPool] {
        let t = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(sim.run::<f64>(&tissue, 1.0, model).unwrap());
        }
        let f64_ms = t.elapsed().as_secs_f64() * 1e3 / reps as f64;
        let t = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(sim.run::<f32>(&tissue, 1.0, model).unwrap());
        }
        let f32_ms = t.elapsed().as_secs_f64() * 1e3 / reps as f64;
        println!("{model:?}: f64 {f64_ms:.2} ms, f32 {f32_ms:.2} ms per fingerprint");
    }
    }
}
