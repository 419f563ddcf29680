//! Full fingerprint simulation over a schedule and slice profile.
//!
//! The timeline runs on a double-buffered copy of the EPG state so that the
//! rotation, relaxation/exchange and gradient shift of an excitation slot
//! happen in one pass over the orders. `F-` is stored one position higher
//! than its order, which turns the shift into plain offset writes.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::schedule::{PulseKind, Schedule};
use super::slice_profile::SliceProfile;
use crate::fpenv::FlushSubnormals;
use crate::epg::{Rotation, DEFAULT_MAX_ORDER};
use crate::epgx::{absorption_lineshape, exchange_matrix, TwoPoolParams};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::waveform::RfWaveform;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalModel {
    SinglePool,
    #[default]
    TwoPool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    /// Order cap; `None` uses the longest segment length, capped at 256.
    pub max_order: Option<usize>,
    /// Zero all transverse states at the end of every excitation slot.
    pub ideal_spoil: bool,
}

pub const B1_RANGE: (f64, f64) = (0.5, 1.5);

impl SimulationOptions {
    pub fn order_cap(&self, schedule: &Schedule) -> usize {
        self.max_order.unwrap_or_else(|| {
            let longest = schedule.segments.iter().map(|s| s.pulses).max().unwrap_or(1);
            longest.clamp(1, DEFAULT_MAX_ORDER)
        })
    }
}

pub fn simulate_fingerprint<T: Real>(
    schedule: &Schedule,
    tissue: &TwoPoolParams,
    b1_scale: f64,
    profile: &SliceProfile,
    model: SignalModel,
) -> Result<Vec<Complex<T>>> {
    Simulator::new(schedule, profile, SimulationOptions::default())?.run(tissue, b1_scale, model)
}

#[derive(Clone, Copy, Debug)]
enum Step {
    Inversion { duration_ms: f64, flip_rad: f64 },
    Excitation { flip_rad: f64, phase_rad: f64, demod: Complex<f64>, power: f64 },
    Idle,
    Mt { flip_rad: f64, power: f64, offset_hz: f64 },
}

/// Schedule and profile preprocessed for repeated simulation.
#[derive(Clone, Debug)]
pub struct Simulator {
    steps: Vec<Step>,
    bins: Vec<(Complex<f64>, f64)>,
    tr_ms: f64,
    inversion_efficiency: f64,
    total_readouts: usize,
    max_order: usize,
    ideal_spoil: bool,
    has_mt: bool,
}

impl Simulator {
    pub fn new(schedule: &Schedule, profile: &SliceProfile, options: SimulationOptions) -> Result<Self> {
        profile.validate()?;
        let max_order = options.order_cap(schedule);
        if max_order == 0 {
            return Err(Error::InvalidParameter("max_order must be positive".into()));
        }
        let mut powers: Vec<(RfWaveform, f64, f64)> = Vec::new();
        let mut power_of = |w: RfWaveform, d: f64| -> f64 {
            if let Some(&(_, _, p)) = powers.iter().find(|(pw, pd, _)| *pw == w && *pd == d) {
                return p;
            }
            let p = w.power_factor(d);
            powers.push((w, d, p));
            p
        };
        let steps = schedule
            .slots
            .iter()
            .map(|slot| match slot.pulse {
                None => Step::Idle,
                Some(p) => match p.kind {
                    PulseKind::Inversion => Step::Inversion {
                        duration_ms: p.duration_ms,
                        flip_rad: p.flip_deg.to_radians(),
                    },
                    PulseKind::Excitation => Step::Excitation {
                        flip_rad: p.flip_deg.to_radians(),
                        phase_rad: p.phase_deg.to_radians(),
                        demod: Complex::from_polar(1.0, -p.demod_phase_deg.to_radians()),
                        power: power_of(p.waveform, p.duration_ms),
                    },
                    PulseKind::MtOffres => Step::Mt {
                        flip_rad: p.flip_deg.to_radians(),
                        power: power_of(p.waveform, p.duration_ms),
                        offset_hz: p.offset_hz,
                    },
                },
            })
            .collect();
        let bins = profile.grouped().iter().map(|b| (b.scale, b.weight)).collect();
        Ok(Self {
            steps,
            bins,
            tr_ms: schedule.tr_ms,
            inversion_efficiency: schedule.inversion_efficiency,
            total_readouts: schedule.total_readouts,
            max_order,
            ideal_spoil: options.ideal_spoil,
            has_mt: schedule.mt_pulse_count() > 0,
        })
    }

    pub fn total_readouts(&self) -> usize {
        self.total_readouts
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Weighted sum of the per-bin readout series.
    pub fn run<T: Real>(&self, tissue: &TwoPoolParams, b1_scale: f64, model: SignalModel) -> Result<Vec<Complex<T>>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.total_readouts];
        self.run_into(tissue, b1_scale, model, &mut out)?;
        Ok(out)
    }

    pub fn run_into<T: Real>(
        &self,
        tissue: &TwoPoolParams,
        b1_scale: f64,
        model: SignalModel,
        out: &mut [Complex<T>],
    ) -> Result<()> {
        let fail = |reason: String| Error::Simulation {
            t1_ms: tissue.t1_ms,
            t2_ms: tissue.t2_ms,
            b1: b1_scale,
            f_frac: tissue.f_frac,
            reason,
        };
        if out.len() != self.total_readouts {
            return Err(Error::LengthMismatch { expected: self.total_readouts, actual: out.len() });
        }
        if !(B1_RANGE.0..=B1_RANGE.1).contains(&b1_scale) {
            return Err(fail(format!("b1 scale outside [{}, {}]", B1_RANGE.0, B1_RANGE.1)));
        }
        tissue.validate().map_err(|e| fail(e.to_string()))?;
        if model == SignalModel::SinglePool && self.has_mt {
            log::warn!("single-pool model ignores the schedule's MT pulses");
        }
        let two_pool = model == SignalModel::TwoPool;
        let f = if two_pool { tissue.f_frac } else { 0.0 };
        let _flush = FlushSubnormals::new();

        let prop = if two_pool {
            Propagator::two_pool(self.tr_ms, tissue)
        } else {
            Propagator::single_pool(self.tr_ms, tissue)
        };
        let sats = if two_pool { self.saturation_factors(tissue, b1_scale)? } else { Vec::new() };

        out.iter_mut().for_each(|v| *v = Complex::new(T::zero(), T::zero()));
        let mut state = FastState::<T>::new(self.max_order);
        for &(scale, weight) in &self.bins {
            let (mag, dphi) = (scale.norm(), scale.arg());
            state.reset(T::of(1.0 - f), T::of(f));
            let w = T::of(weight);
            let mut r = 0;
            for (i, step) in self.steps.iter().enumerate() {
                let sat = sats.get(i).copied().unwrap_or(T::one());
                match *step {
                    Step::Inversion { .. } => {
                        state.invert(T::of(self.inversion_efficiency), sat);
                        state.idle(&prop, two_pool);
                    }
                    Step::Excitation { flip_rad, phase_rad, demod, .. } => {
                        let rot = Rotation::<T>::new(T::of(flip_rad * b1_scale * mag), T::of(phase_rad + dphi));
                        let s = if two_pool {
                            state.excite::<true>(&rot, sat, &prop, self.ideal_spoil)
                        } else {
                            state.excite::<false>(&rot, sat, &prop, self.ideal_spoil)
                        };
                        let d = Complex::new(T::of(demod.re), T::of(demod.im));
                        out[r] = out[r] + s * d * w;
                        r += 1;
                    }
                    Step::Idle => state.idle(&prop, two_pool),
                    Step::Mt { .. } => {
                        state.idle(&prop, two_pool);
                        if two_pool {
                            state.saturate(sat);
                        }
                    }
                }
            }
            if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(fail("non-finite signal".into()));
            }
        }
        Ok(())
    }

    /// Bound-pool survival factor `exp(-wt)` per slot.
    fn saturation_factors<T: Real>(&self, tissue: &TwoPoolParams, b1: f64) -> Result<Vec<T>> {
        let mut g_cache: Vec<(f64, f64)> = Vec::new();
        let mut g = |delta: f64| -> Result<f64> {
            if let Some(&(_, v)) = g_cache.iter().find(|(d, _)| *d == delta) {
                return Ok(v);
            }
            let v = absorption_lineshape(tissue.t2ss_us, delta, tissue.lineshape)?;
            g_cache.push((delta, v));
            Ok(v)
        };
        let pi = std::f64::consts::PI;
        self.steps
            .iter()
            .map(|s| {
                let wt = match *s {
                    Step::Inversion { duration_ms, flip_rad } => {
                        let a = b1 * flip_rad;
                        pi * g(0.0)? * a * a / (duration_ms * 1e-3)
                    }
                    Step::Excitation { flip_rad, power, .. } => {
                        let a = b1 * flip_rad;
                        pi * g(0.0)? * a * a * power
                    }
                    Step::Mt { flip_rad, power, offset_hz } => {
                        let a = b1 * flip_rad;
                        pi * g(offset_hz)? * a * a * power
                    }
                    Step::Idle => 0.0,
                };
                Ok(T::of((-wt).exp()))
            })
            .collect()
    }
}

/// Per-TR longitudinal propagator and transverse decay.
#[derive(Clone, Copy, Debug)]
struct Propagator {
    e2: f64,
    m: [[f64; 2]; 2],
    recovery: [f64; 2],
}

impl Propagator {
    fn two_pool(tr_ms: f64, p: &TwoPoolParams) -> Self {
        let m = exchange_matrix(tr_ms, p);
        let eq = [1.0 - p.f_frac, p.f_frac];
        Self {
            e2: (-tr_ms / p.t2_ms).exp(),
            m,
            recovery: [
                eq[0] - (m[0][0] * eq[0] + m[0][1] * eq[1]),
                eq[1] - (m[1][0] * eq[0] + m[1][1] * eq[1]),
            ],
        }
    }

    fn single_pool(tr_ms: f64, p: &TwoPoolParams) -> Self {
        let e1 = (-tr_ms / p.t1_ms).exp();
        Self { e2: (-tr_ms / p.t2_ms).exp(), m: [[e1, 0.0], [0.0, 0.0]], recovery: [1.0 - e1, 0.0] }
    }
}

#[derive(Clone, Debug)]
struct Buffers<T> {
    fp_re: Vec<T>,
    fp_im: Vec<T>,
    /// `F-(k)` lives at position `k + 1`; position 0 is scratch.
    fm_re: Vec<T>,
    fm_im: Vec<T>,
    z_re: Vec<T>,
    z_im: Vec<T>,
    zb_re: Vec<T>,
    zb_im: Vec<T>,
}

impl<T: Real> Buffers<T> {
    fn new(len: usize) -> Self {
        let z = || vec![T::zero(); len];
        Self { fp_re: z(), fp_im: z(), fm_re: z(), fm_im: z(), z_re: z(), z_im: z(), zb_re: z(), zb_im: z() }
    }
}

struct FastState<T> {
    cur: Buffers<T>,
    next: Buffers<T>,
    active: usize,
    max_order: usize,
}

impl<T: Real> FastState<T> {
    fn new(max_order: usize) -> Self {
        Self { cur: Buffers::new(max_order + 2), next: Buffers::new(max_order + 2), active: 1, max_order }
    }

    fn reset(&mut self, za: T, zb: T) {
        for b in [&mut self.cur, &mut self.next] {
            for v in [
                &mut b.fp_re, &mut b.fp_im, &mut b.fm_re, &mut b.fm_im, &mut b.z_re, &mut b.z_im, &mut b.zb_re,
                &mut b.zb_im,
            ] {
                v.fill(T::zero());
            }
        }
        self.cur.z_re[0] = za;
        self.cur.zb_re[0] = zb;
        self.active = 1;
    }

    fn invert(&mut self, efficiency: T, sat: T) {
        let n = self.active;
        let b = &mut self.cur;
        for v in [&mut b.fp_re, &mut b.fp_im] {
            v[..n].fill(T::zero());
        }
        for v in [&mut b.fm_re, &mut b.fm_im] {
            v[..n + 1].fill(T::zero());
        }
        for v in [&mut b.z_re, &mut b.z_im] {
            v[..n].iter_mut().for_each(|x| *x = -*x * efficiency);
        }
        self.saturate(sat);
    }

    fn saturate(&mut self, factor: T) {
        let n = self.active;
        let b = &mut self.cur;
        for v in [&mut b.zb_re, &mut b.zb_im] {
            v[..n].iter_mut().for_each(|x| *x = *x * factor);
        }
    }

    /// Relaxation and exchange over one TR without dephasing.
    fn idle(&mut self, prop: &Propagator, two_pool: bool) {
        let n = self.active;
        let b = &mut self.cur;
        let e2 = T::of(prop.e2);
        for v in [&mut b.fp_re, &mut b.fp_im] {
            v[..n].iter_mut().for_each(|x| *x = *x * e2);
        }
        for v in [&mut b.fm_re, &mut b.fm_im] {
            v[1..n + 1].iter_mut().for_each(|x| *x = *x * e2);
        }
        let [[a, bb], [c, d]] = prop.m.map(|r| r.map(T::of));
        if two_pool {
            for (za, zb) in [(&mut b.z_re, &mut b.zb_re), (&mut b.z_im, &mut b.zb_im)] {
                for (x, y) in za[..n].iter_mut().zip(&mut zb[..n]) {
                    let (u, w) = (*x, *y);
                    *x = a * u + bb * w;
                    *y = c * u + d * w;
                }
            }
            b.zb_re[0] = b.zb_re[0] + T::of(prop.recovery[1]);
        } else {
            for v in [&mut b.z_re, &mut b.z_im] {
                v[..n].iter_mut().for_each(|x| *x = a * *x);
            }
        }
        b.z_re[0] = b.z_re[0] + T::of(prop.recovery[0]);
    }

    /// RF rotation with bound-pool saturation, readout, relaxation/exchange
    /// over one TR and a unit dephasing shift. Returns the undemodulated
    /// readout `F+(0)` just after the pulse.
    fn excite<const TWO: bool>(&mut self, r: &Rotation<T>, sat: T, prop: &Propagator, spoil: bool) -> Complex<T> {
        let n = self.active;
        let half = T::of(0.5);
        let (c, pr, pi, qr, qi, ca) = (r.c, r.p.re, r.p.im, r.q.re, r.q.im, r.cos_a);
        let e2 = T::of(prop.e2);
        let [[m00, m01], [m10, m11]] = prop.m.map(|row| row.map(T::of));

        let readout = {
            let (ar, ai) = (self.cur.fp_re[0], self.cur.fp_im[0]);
            let (br, bi) = (self.cur.fm_re[1], self.cur.fm_im[1]);
            let (zr, zi) = (self.cur.z_re[0], self.cur.z_im[0]);
            Complex::new(
                c * ar + (pr * br - pi * bi) + (qr * zr - qi * zi),
                c * ai + (pr * bi + pi * br) + (qr * zi + qi * zr),
            )
        };

        let (cur, next) = (&self.cur, &mut self.next);
        let (ifp_re, ifp_im) = (&cur.fp_re[..n], &cur.fp_im[..n]);
        let (ifm_re, ifm_im) = (&cur.fm_re[1..n + 1], &cur.fm_im[1..n + 1]);
        let (iz_re, iz_im) = (&cur.z_re[..n], &cur.z_im[..n]);
        let (izb_re, izb_im) = (&cur.zb_re[..n], &cur.zb_im[..n]);
        let (ofp_re, ofp_im) = (&mut next.fp_re[1..n + 1], &mut next.fp_im[1..n + 1]);
        let (ofm_re, ofm_im) = (&mut next.fm_re[..n], &mut next.fm_im[..n]);
        let (oz_re, oz_im) = (&mut next.z_re[..n], &mut next.z_im[..n]);
        let (ozb_re, ozb_im) = (&mut next.zb_re[..n], &mut next.zb_im[..n]);
        let t = if spoil { T::zero() } else { e2 };
        for k in 0..n {
            let (ar, ai) = (ifp_re[k], ifp_im[k]);
            let (br, bi) = (ifm_re[k], ifm_im[k]);
            let (zr, zi) = (iz_re[k], iz_im[k]);
            ofp_re[k] = t * (c * ar + (pr * br - pi * bi) + (qr * zr - qi * zi));
            ofp_im[k] = t * (c * ai + (pr * bi + pi * br) + (qr * zi + qi * zr));
            ofm_re[k] = t * ((pr * ar + pi * ai) + c * br + (qr * zr + qi * zi));
            ofm_im[k] = t * ((pr * ai - pi * ar) + c * bi + (qr * zi - qi * zr));
            let nzr = ca * zr - half * ((qr * ar + qi * ai) + (qr * br - qi * bi));
            let nzi = ca * zi - half * ((qr * ai - qi * ar) + (qr * bi + qi * br));
            if TWO {
                let (wr, wi) = (izb_re[k] * sat, izb_im[k] * sat);
                oz_re[k] = m00 * nzr + m01 * wr;
                oz_im[k] = m00 * nzi + m01 * wi;
                ozb_re[k] = m10 * nzr + m11 * wr;
                ozb_im[k] = m10 * nzi + m11 * wi;
            } else {
                oz_re[k] = m00 * nzr;
                oz_im[k] = m00 * nzi;
            }
        }
        let next = &mut self.next;
        next.z_re[0] = next.z_re[0] + T::of(prop.recovery[0]);
        if TWO {
            next.zb_re[0] = next.zb_re[0] + T::of(prop.recovery[1]);
        }
        // F-(n-1) and, when the state grows, F-(n) and the new Z orders are empty.
        let grown = (n + 1).min(self.max_order + 1);
        for k in n..grown + 1 {
            next.fm_re[k] = T::zero();
            next.fm_im[k] = T::zero();
        }
        if grown > n {
            next.z_re[n] = T::zero();
            next.z_im[n] = T::zero();
            next.zb_re[n] = T::zero();
            next.zb_im[n] = T::zero();
        }
        next.fp_re[0] = next.fm_re[1];
        next.fp_im[0] = -next.fm_im[1];
        std::mem::swap(&mut self.cur, &mut self.next);
        self.active = grown;
        readout
    }
}
