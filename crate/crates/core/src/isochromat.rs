//! Brute-force isochromat simulator used to validate the EPG engine.
//!
//! `n_spins` classical magnetization vectors are placed at equally spaced
//! dephasing angles `θ_j = 2πj/n_spins`; each unit gradient shift advances
//! spin `j` by `θ_j`. The readout is the average transverse magnetization,
//! which equals `F+(0)` as long as no configuration order reaches
//! `n_spins / 2`.

use num_complex::Complex;

use crate::epg::{Event, RelaxationParams};
use crate::error::{Error, Result};

pub fn isochromat_reference(
    events: &[Event],
    params: &RelaxationParams,
    n_spins: usize,
) -> Result<Vec<Complex<f64>>> {
    if n_spins < 2 {
        return Err(Error::InvalidParameter(format!("n_spins must be >= 2, got {n_spins}")));
    }
    params.validate()?;
    let mut mx = vec![0.0f64; n_spins];
    let mut my = vec![0.0f64; n_spins];
    let mut mz = vec![1.0f64; n_spins];
    let dephase: Vec<(f64, f64)> = (0..n_spins)
        .map(|j| (2.0 * std::f64::consts::PI * j as f64 / n_spins as f64).sin_cos())
        .collect();
    let mut out = Vec::new();

    for ev in events {
        match *ev {
            Event::Rf { flip_rad, phase_rad } => {
                let (ux, uy) = (phase_rad.cos(), phase_rad.sin());
                let (s, c) = flip_rad.sin_cos();
                for j in 0..n_spins {
                    let (x, y, z) = (mx[j], my[j], mz[j]);
                    let dot = ux * x + uy * y;
                    // Rodrigues: v c + (u × v) s + u (u·v)(1 - c)
                    mx[j] = x * c + uy * z * s + ux * dot * (1.0 - c);
                    my[j] = y * c - ux * z * s + uy * dot * (1.0 - c);
                    mz[j] = z * c + (ux * y - uy * x) * s;
                }
            }
            Event::Relax { dt_ms } => {
                if dt_ms < 0.0 || !dt_ms.is_finite() {
                    return Err(Error::InvalidParameter(format!("bad interval {dt_ms}")));
                }
                let e1 = (-dt_ms / params.t1_ms).exp();
                let e2 = (-dt_ms / params.t2_ms).exp();
                for j in 0..n_spins {
                    mx[j] *= e2;
                    my[j] *= e2;
                    mz[j] = mz[j] * e1 + (1.0 - e1);
                }
            }
            Event::Shift(cycles) => {
                for _ in 0..cycles.unsigned_abs() {
                    for (j, &(s, c)) in dephase.iter().enumerate() {
                        let s = if cycles > 0 { s } else { -s };
                        let (x, y) = (mx[j], my[j]);
                        mx[j] = x * c - y * s;
                        my[j] = x * s + y * c;
                    }
                }
            }
            Event::Readout { demod_rad } => {
                let n = n_spins as f64;
                let avg = Complex::new(mx.iter().sum::<f64>() / n, my.iter().sum::<f64>() / n);
                out.push(avg * Complex::from_polar(1.0, -demod_rad));
            }
            Event::Spoil => {
                mx.fill(0.0);
                my.fill(0.0);
            }
            Event::Saturate { .. } => {
                return Err(Error::UnsupportedEvent(
                    "isochromat reference models a single pool only".into(),
                ))
            }
        }
    }
    Ok(out)
}
