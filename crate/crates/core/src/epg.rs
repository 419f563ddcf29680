//! Single-pool extended phase graph (EPG) engine.
//!
//! Magnetization is held as configuration states indexed by dephasing order
//! `k = 0..=K`: transverse states `F+(k)`, `F-(k)` and longitudinal states
//! `Z(k)`. The transverse magnetization of an isochromat at dephasing angle
//! `θ` is `Mxy(θ) = Σ_k F+(k) e^{ikθ}` with `F+(-k) = conj(F-(k))`, where
//! `Mxy = Mx + i·My`. RF pulses are right-handed rotations of the
//! magnetization about the transverse axis at azimuth `phase`.
//!
//! Storage is structure-of-arrays (separate real/imaginary buffers per state
//! kind) so the per-order loops vectorize.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dephasing order cap used when nothing else is configured.
pub const DEFAULT_MAX_ORDER: usize = 256;

/// Free-pool relaxation times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxationParams {
    pub t1_ms: f64,
    pub t2_ms: f64,
}

impl RelaxationParams {
    pub fn new(t1_ms: f64, t2_ms: f64) -> Result<Self> {
        let p = Self { t1_ms, t2_ms };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t1_ms.is_finite() || !self.t2_ms.is_finite() {
            return Err(Error::NonFinite("relaxation time"));
        }
        if self.t1_ms <= 0.0 || self.t2_ms <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "relaxation times must be positive (t1={}, t2={})",
                self.t1_ms, self.t2_ms
            )));
        }
        if self.t2_ms > self.t1_ms {
            return Err(Error::InvalidParameter(format!(
                "t2 ({} ms) exceeds t1 ({} ms)",
                self.t2_ms, self.t1_ms
            )));
        }
        Ok(())
    }
}

/// Decay factors for one free-precession interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Relaxation<T> {
    pub e1: T,
    pub e2: T,
}

impl<T: Real> Relaxation<T> {
    pub fn new(dt_ms: f64, params: &RelaxationParams) -> Result<Self> {
        if !dt_ms.is_finite() {
            return Err(Error::NonFinite("dt"));
        }
        if dt_ms < 0.0 {
            return Err(Error::InvalidParameter(format!("negative interval {dt_ms} ms")));
        }
        params.validate()?;
        Ok(Self {
            e1: T::of((-dt_ms / params.t1_ms).exp()),
            e2: T::of((-dt_ms / params.t2_ms).exp()),
        })
    }
}

/// Mixing coefficients of an instantaneous RF rotation.
///
/// With `c = cos²(α/2)`, `p = sin²(α/2)·e^{2iφ}` and `q = -i·sin(α)·e^{iφ}`:
///
/// ```text
/// F+' =        c·F+  +       p·F-  +      q·Z
/// F-' =  conj(p)·F+  +       c·F-  + conj(q)·Z
/// Z'  = -conj(q)/2·F+ -    q/2·F-  +  cos(α)·Z
/// ```
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation<T> {
    pub(crate) c: T,
    pub(crate) p: Complex<T>,
    pub(crate) q: Complex<T>,
    pub(crate) cos_a: T,
}

impl<T: Real> Rotation<T> {
    pub fn new(flip_rad: T, phase_rad: T) -> Self {
        let half = T::of(0.5);
        let two = T::of(2.0);
        let (sh, ch) = (flip_rad * half).sin_cos();
        let (sa, ca) = (two * sh * ch, ch * ch - sh * sh);
        let (s1, c1) = phase_rad.sin_cos();
        let (s2, c2) = (two * s1 * c1, c1 * c1 - s1 * s1);
        Self {
            c: ch * ch,
            p: Complex::new(sh * sh * c2, sh * sh * s2),
            // -i·sin(α)·(c1 + i·s1)
            q: Complex::new(sa * s1, -sa * c1),
            cos_a: ca,
        }
    }

    pub fn identity() -> Self {
        Self::new(T::zero(), T::zero())
    }
}

/// Dephasing-order state of a single spin pool.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinConfiguration<T> {
    pub(crate) fp_re: Vec<T>,
    pub(crate) fp_im: Vec<T>,
    pub(crate) fm_re: Vec<T>,
    pub(crate) fm_im: Vec<T>,
    pub(crate) z_re: Vec<T>,
    pub(crate) z_im: Vec<T>,
    /// Orders `0..active` may be nonzero; everything above is exactly zero.
    pub(crate) active: usize,
}

impl<T: Real> SpinConfiguration<T> {
    /// Equilibrium state with unit longitudinal magnetization.
    pub fn new(max_order: usize) -> Self {
        Self::with_equilibrium(max_order, T::one())
    }

    /// Equilibrium state with `Z(0) = m0`.
    pub fn with_equilibrium(max_order: usize, m0: T) -> Self {
        let n = max_order + 1;
        let mut z_re = vec![T::zero(); n];
        z_re[0] = m0;
        Self {
            fp_re: vec![T::zero(); n],
            fp_im: vec![T::zero(); n],
            fm_re: vec![T::zero(); n],
            fm_im: vec![T::zero(); n],
            z_re,
            z_im: vec![T::zero(); n],
            active: 1,
        }
    }

    /// Highest representable dephasing order `K`.
    pub fn max_order(&self) -> usize {
        self.z_re.len() - 1
    }

    /// Number of leading orders that may hold nonzero states.
    pub fn active_orders(&self) -> usize {
        self.active
    }

    pub fn f_plus(&self, k: usize) -> Complex<T> {
        Complex::new(self.fp_re[k], self.fp_im[k])
    }

    pub fn f_minus(&self, k: usize) -> Complex<T> {
        Complex::new(self.fm_re[k], self.fm_im[k])
    }

    pub fn z(&self, k: usize) -> Complex<T> {
        Complex::new(self.z_re[k], self.z_im[k])
    }

    /// Sets `F+(k)`. At `k = 0` the conjugate `F-(0)` is kept in sync.
    pub fn set_f_plus(&mut self, k: usize, v: Complex<T>) {
        self.fp_re[k] = v.re;
        self.fp_im[k] = v.im;
        if k == 0 {
            self.fm_re[0] = v.re;
            self.fm_im[0] = -v.im;
        }
        self.touch(k);
    }

    /// Sets `F-(k)`. At `k = 0` the conjugate `F+(0)` is kept in sync.
    pub fn set_f_minus(&mut self, k: usize, v: Complex<T>) {
        self.fm_re[k] = v.re;
        self.fm_im[k] = v.im;
        if k == 0 {
            self.fp_re[0] = v.re;
            self.fp_im[0] = -v.im;
        }
        self.touch(k);
    }

    pub fn set_z(&mut self, k: usize, v: Complex<T>) {
        self.z_re[k] = v.re;
        self.z_im[k] = v.im;
        self.touch(k);
    }

    fn touch(&mut self, k: usize) {
        self.active = self.active.max(k + 1);
    }

    /// Instantaneous RF rotation by `flip_rad` about the axis at azimuth `phase_rad`.
    pub fn rf_rotate(&mut self, flip_rad: T, phase_rad: T) -> Result<()> {
        if !flip_rad.is_finite() || !phase_rad.is_finite() {
            return Err(Error::NonFinite("rf angle"));
        }
        self.apply_rotation(&Rotation::new(flip_rad, phase_rad));
        Ok(())
    }

    pub fn apply_rotation(&mut self, r: &Rotation<T>) {
        let n = self.active;
        rotate_kernel(
            r,
            &mut self.fp_re[..n],
            &mut self.fp_im[..n],
            &mut self.fm_re[..n],
            &mut self.fm_im[..n],
            &mut self.z_re[..n],
            &mut self.z_im[..n],
        );
    }

    /// Free relaxation and recovery over `dt_ms`.
    pub fn relax(&mut self, dt_ms: f64, params: &RelaxationParams) -> Result<()> {
        let r = Relaxation::new(dt_ms, params)?;
        self.apply_relaxation(&r);
        Ok(())
    }

    pub fn apply_relaxation(&mut self, r: &Relaxation<T>) {
        let n = self.active;
        for buf in [&mut self.fp_re, &mut self.fp_im, &mut self.fm_re, &mut self.fm_im] {
            for v in &mut buf[..n] {
                *v = *v * r.e2;
            }
        }
        for buf in [&mut self.z_re, &mut self.z_im] {
            for v in &mut buf[..n] {
                *v = *v * r.e1;
            }
        }
        self.z_re[0] = self.z_re[0] + (T::one() - r.e1);
    }

    /// Dephasing by `cycles` full gradient cycles. States pushed past `K` are dropped.
    pub fn grad_shift(&mut self, cycles: i32) {
        for _ in 0..cycles.unsigned_abs() {
            if cycles > 0 {
                self.shift_up();
            } else {
                self.shift_down();
            }
        }
    }

    fn shift_up(&mut self) {
        let n = self.active;
        let grown = (n + 1).min(self.z_re.len());
        shift_pair(
            &mut self.fp_re,
            &mut self.fp_im,
            &mut self.fm_re,
            &mut self.fm_im,
            n,
            grown,
        );
        self.active = grown;
    }

    fn shift_down(&mut self) {
        let n = self.active;
        let grown = (n + 1).min(self.z_re.len());
        shift_pair(
            &mut self.fm_re,
            &mut self.fm_im,
            &mut self.fp_re,
            &mut self.fp_im,
            n,
            grown,
        );
        self.active = grown;
    }

    /// Receiver sample `F+(0)·e^{-i·demod}`.
    pub fn readout_signal(&self, demod_phase_rad: T) -> Complex<T> {
        let (s, c) = demod_phase_rad.sin_cos();
        self.f_plus(0) * Complex::new(c, -s)
    }

    /// Zeroes every transverse state (ideal spoiling).
    pub fn spoil_transverse(&mut self) {
        let n = self.active;
        for buf in [&mut self.fp_re, &mut self.fp_im, &mut self.fm_re, &mut self.fm_im] {
            buf[..n].fill(T::zero());
        }
    }

    /// Scales the longitudinal states, zeroing transverse ones (inversion with crusher).
    pub fn invert_longitudinal(&mut self, efficiency: T) {
        self.spoil_transverse();
        let n = self.active;
        for buf in [&mut self.z_re, &mut self.z_im] {
            for v in &mut buf[..n] {
                *v = -*v * efficiency;
            }
        }
    }
}

/// Moves `up` one order higher and `down` one order lower, then restores the
/// order-zero conjugate relation `up(0) = conj(down(0))`.
fn shift_pair<T: Real>(
    up_re: &mut [T],
    up_im: &mut [T],
    down_re: &mut [T],
    down_im: &mut [T],
    n: usize,
    grown: usize,
) {
    up_re.copy_within(0..grown - 1, 1);
    up_im.copy_within(0..grown - 1, 1);
    down_re.copy_within(1..n, 0);
    down_im.copy_within(1..n, 0);
    down_re[n - 1] = T::zero();
    down_im[n - 1] = T::zero();
    up_re[0] = down_re[0];
    up_im[0] = -down_im[0];
}

#[inline(always)]
pub(crate) fn rotate_kernel<T: Real>(
    r: &Rotation<T>,
    fp_re: &mut [T],
    fp_im: &mut [T],
    fm_re: &mut [T],
    fm_im: &mut [T],
    z_re: &mut [T],
    z_im: &mut [T],
) {
    let n = fp_re.len();
    let (fp_im, fm_re, fm_im) = (&mut fp_im[..n], &mut fm_re[..n], &mut fm_im[..n]);
    let (z_re, z_im) = (&mut z_re[..n], &mut z_im[..n]);
    let c = r.c;
    let (pr, pi) = (r.p.re, r.p.im);
    let (qr, qi) = (r.q.re, r.q.im);
    let ca = r.cos_a;
    let half = T::of(0.5);
    for k in 0..n {
        let (ar, ai) = (fp_re[k], fp_im[k]);
        let (br, bi) = (fm_re[k], fm_im[k]);
        let (zr, zi) = (z_re[k], z_im[k]);
        fp_re[k] = c * ar + (pr * br - pi * bi) + (qr * zr - qi * zi);
        fp_im[k] = c * ai + (pr * bi + pi * br) + (qr * zi + qi * zr);
        fm_re[k] = (pr * ar + pi * ai) + c * br + (qr * zr + qi * zi);
        fm_im[k] = (pr * ai - pi * ar) + c * bi + (qr * zi - qi * zr);
        z_re[k] = ca * zr - half * ((qr * ar + qi * ai) + (qr * br - qi * bi));
        z_im[k] = ca * zi - half * ((qr * ai - qi * ar) + (qr * bi + qi * br));
    }
}

/// Elementary operations understood by [`simulate_events`] and the isochromat oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Event {
    Rf { flip_rad: f64, phase_rad: f64 },
    Relax { dt_ms: f64 },
    Shift(i32),
    Readout { demod_rad: f64 },
    /// Zero all transverse magnetization.
    Spoil,
    /// Bound-pool saturation; meaningful only for two-pool systems.
    Saturate { wt: f64 },
}

/// Runs an event list through the EPG engine and returns the readout series.
pub fn simulate_events<T: Real>(
    events: &[Event],
    params: &RelaxationParams,
    max_order: usize,
) -> Result<Vec<Complex<T>>> {
    let mut state = SpinConfiguration::<T>::new(max_order);
    let mut out = Vec::new();
    for ev in events {
        match *ev {
            Event::Rf { flip_rad, phase_rad } => state.rf_rotate(T::of(flip_rad), T::of(phase_rad))?,
            Event::Relax { dt_ms } => state.relax(dt_ms, params)?,
            Event::Shift(c) => state.grad_shift(c),
            Event::Readout { demod_rad } => out.push(state.readout_signal(T::of(demod_rad))),
            Event::Spoil => state.spoil_transverse(),
            Event::Saturate { .. } => {
                return Err(Error::UnsupportedEvent("saturation in a single-pool system".into()))
            }
        }
    }
    Ok(out)
}
