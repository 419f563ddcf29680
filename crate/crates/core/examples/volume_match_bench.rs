//! Times single-threaded matching of a noisy 128 x 128 volume against a stored dictionary.

use std::time::Instant;

use mtmrf::analysis::{add_noise, case_rng};
use mtmrf::matcher::{match_volume, MatchMode, Volume};

fn main() {
    let path = std::env::args().nth(1).expect("usage: volume_match_bench <dictionary.mtd>");
    let d = mtmrf::dictionary::load(&path).unwrap();
    let mut vol = Volume::new(Some(d.metadata.schedule_hash.clone()), d.n_points());
    let mut rng = case_rng(1, 0);
    for i in 0..128 * 128 {
        let mut s = d.fingerprint((i * 7919) % d.len());
        add_noise(&mut s, 30.0, &mut rng).unwrap();
        vol.push(&s).unwrap();
    }
    let t = Instant::now();
    let maps = match_volume(&vol, &d, MatchMode::Complex, 1).unwrap();
    println!("128x128 match: {:.1} s, {} failures", t.elapsed().as_secs_f64(), maps.failures.len());
}
