//! Two-pool extension of the EPG engine: a free water pool exchanging
//! longitudinal magnetization with a semi-solid (bound) pool.
//!
//! The bound pool carries only longitudinal orders; its transverse relaxation
//! (microseconds) rules out coherence between pulses. RF pulses saturate it
//! according to the absorption lineshape and the pulse power.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::epg::{RelaxationParams, Rotation, SpinConfiguration};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::waveform::{power_factor, RfWaveform};

/// Literature value for the semi-solid transverse relaxation time.
pub const DEFAULT_T2SS_US: f64 = 12.0;
/// Literature white-matter exchange rate (free → semi-solid).
pub const DEFAULT_K_PER_S: f64 = 4.3;

/// Below this offset the super-Lorentzian is extrapolated from its wings.
const SUPER_LORENTZIAN_CUTOFF_HZ: f64 = 1000.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lineshape {
    #[default]
    Gaussian,
    SuperLorentzian,
}

/// Tissue parameters of the two-pool model. The bound pool shares the free
/// pool's T1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPoolParams {
    pub t1_ms: f64,
    pub t2_ms: f64,
    /// Semi-solid fraction of the total equilibrium magnetization.
    pub f_frac: f64,
    pub k_per_s: f64,
    pub t2ss_us: f64,
    pub lineshape: Lineshape,
}

impl TwoPoolParams {
    /// Parameters with the fixed literature values for `k` and `T2,ss`.
    pub fn new(t1_ms: f64, t2_ms: f64, f_frac: f64) -> Self {
        Self {
            t1_ms,
            t2_ms,
            f_frac,
            k_per_s: DEFAULT_K_PER_S,
            t2ss_us: DEFAULT_T2SS_US,
            lineshape: Lineshape::Gaussian,
        }
    }

    pub fn single_pool(t1_ms: f64, t2_ms: f64) -> Self {
        Self::new(t1_ms, t2_ms, 0.0)
    }

    pub fn relaxation(&self) -> RelaxationParams {
        RelaxationParams { t1_ms: self.t1_ms, t2_ms: self.t2_ms }
    }

    pub fn validate(&self) -> Result<()> {
        self.relaxation().validate()?;
        if !self.f_frac.is_finite() || !self.k_per_s.is_finite() || !self.t2ss_us.is_finite() {
            return Err(Error::NonFinite("two-pool parameter"));
        }
        if !(0.0..0.5).contains(&self.f_frac) {
            return Err(Error::InvalidParameter(format!(
                "fractional pool size {} outside [0, 0.5)",
                self.f_frac
            )));
        }
        if self.k_per_s < 0.0 {
            return Err(Error::InvalidParameter(format!("negative exchange rate {}", self.k_per_s)));
        }
        if self.t2ss_us <= 0.0 {
            return Err(Error::InvalidParameter(format!("non-positive T2,ss {}", self.t2ss_us)));
        }
        Ok(())
    }

    /// Reverse (semi-solid → free) rate from detailed balance, in 1/s.
    pub fn reverse_rate_per_s(&self) -> f64 {
        if self.f_frac == 0.0 {
            0.0
        } else {
            self.k_per_s * (1.0 - self.f_frac) / self.f_frac
        }
    }
}

/// Absorption lineshape `G(Δ)` of the semi-solid pool, in seconds.
pub fn absorption_lineshape(t2ss_us: f64, delta_hz: f64, kind: Lineshape) -> Result<f64> {
    if !t2ss_us.is_finite() || !delta_hz.is_finite() {
        return Err(Error::NonFinite("lineshape argument"));
    }
    if t2ss_us <= 0.0 {
        return Err(Error::InvalidParameter(format!("non-positive T2,ss {t2ss_us}")));
    }
    let t2 = t2ss_us * 1e-6;
    Ok(match kind {
        Lineshape::Gaussian => gaussian_lineshape(t2, delta_hz),
        Lineshape::SuperLorentzian => {
            let d = delta_hz.abs();
            if d >= SUPER_LORENTZIAN_CUTOFF_HZ {
                super_lorentzian(t2, d)
            } else {
                super_lorentzian_core(t2, d)
            }
        }
    })
}

fn gaussian_lineshape(t2: f64, delta_hz: f64) -> f64 {
    let x = 2.0 * std::f64::consts::PI * delta_hz * t2;
    t2 / (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * x * x).exp()
}

/// Polar-angle integral in `u = cos θ`, split at the magic angle where the
/// integrand vanishes smoothly.
fn super_lorentzian(t2: f64, delta_hz: f64) -> f64 {
    let magic = (1.0f64 / 3.0).sqrt();
    let f = |u: f64| {
        let d = (3.0 * u * u - 1.0).abs();
        if d == 0.0 {
            return 0.0;
        }
        let x = 2.0 * std::f64::consts::PI * delta_hz * t2 / d;
        t2 / d * (-2.0 * x * x).exp()
    };
    let scale = (2.0 / std::f64::consts::PI).sqrt();
    scale * (simpson(f, 0.0, magic, 4000) + simpson(f, magic, 1.0, 4000))
}

/// Even quadratic in `Δ²` through the wing values at 1, 1.5 and 2 kHz.
fn super_lorentzian_core(t2: f64, delta_hz: f64) -> f64 {
    let nodes = [1000.0f64, 1500.0, 2000.0];
    let xs = nodes.map(|d| d * d);
    let ys = nodes.map(|d| super_lorentzian(t2, d));
    let x = delta_hz * delta_hz;
    let mut acc = 0.0;
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if i != j {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += w * ys[i];
    }
    acc
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Bound-pool saturation of one pulse: the pool is scaled by `exp(-wt)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SaturationSpec {
    pub wt: f64,
}

impl SaturationSpec {
    pub const NONE: SaturationSpec = SaturationSpec { wt: 0.0 };

    pub fn factor(&self) -> f64 {
        (-self.wt).exp()
    }
}

/// Saturation exponent `wt = π·G(Δ)·∫ω1² dt` of a pulse whose effective flip
/// is `b1_scale·flip_rad`, with `ω1(t) = α·b(t)/∫b dt`.
///
/// `waveform` holds uniformly spaced amplitude samples covering `duration_ms`.
pub fn pulse_saturation(
    flip_rad: f64,
    duration_ms: f64,
    waveform: &[f64],
    b1_scale: f64,
    delta_hz: f64,
    t2ss_us: f64,
    kind: Lineshape,
) -> Result<SaturationSpec> {
    if !flip_rad.is_finite() || !duration_ms.is_finite() || !b1_scale.is_finite() {
        return Err(Error::NonFinite("pulse parameter"));
    }
    if duration_ms <= 0.0 {
        return Err(Error::InvalidParameter(format!("pulse duration {duration_ms} ms")));
    }
    if waveform.is_empty() || waveform.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidParameter("waveform must be non-empty and finite".into()));
    }
    let pf = power_factor(waveform, duration_ms);
    if pf == 0.0 {
        return Err(Error::InvalidParameter("waveform integrates to zero".into()));
    }
    let g = absorption_lineshape(t2ss_us, delta_hz, kind)?;
    let alpha = b1_scale * flip_rad;
    Ok(SaturationSpec { wt: std::f64::consts::PI * g * alpha * alpha * pf })
}

/// [`pulse_saturation`] for one of the built-in shapes.
pub fn shaped_pulse_saturation(
    flip_rad: f64,
    duration_ms: f64,
    shape: RfWaveform,
    b1_scale: f64,
    delta_hz: f64,
    params: &TwoPoolParams,
) -> Result<SaturationSpec> {
    let samples = shape.samples(crate::waveform::WAVEFORM_SAMPLES);
    pulse_saturation(flip_rad, duration_ms, &samples, b1_scale, delta_hz, params.t2ss_us, params.lineshape)
}

/// Adiabatic inversion, modelled as instantaneous scaling of the free
/// longitudinal states plus the saturation of an equivalent hard pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionSpec {
    pub efficiency: f64,
    pub duration_ms: f64,
    pub equivalent_flip_rad: f64,
}

impl Default for InversionSpec {
    fn default() -> Self {
        Self { efficiency: 1.0, duration_ms: 10.0, equivalent_flip_rad: std::f64::consts::PI }
    }
}

impl InversionSpec {
    pub fn saturation(&self, b1_scale: f64, params: &TwoPoolParams) -> Result<SaturationSpec> {
        pulse_saturation(
            self.equivalent_flip_rad,
            self.duration_ms,
            &[1.0],
            b1_scale,
            0.0,
            params.t2ss_us,
            params.lineshape,
        )
    }
}

/// Exact longitudinal propagator of the coupled free/bound system over one interval.
///
/// `d/dt (Za, Zb) = Λ (Za, Zb) + C` with `Λ = -R1·I + X`,
/// `X = [[-ka, kb], [ka, -kb]]`. `X` has eigenvalues `0` and `-(ka + kb)`, so
/// `exp(Λt) = e^{-R1 t} (I + X (1 - e^{-(ka+kb) t}) / (ka + kb))`.
/// Order zero additionally relaxes toward `(1 - F, F)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExchangePropagator<T> {
    pub e2: T,
    pub m: [[T; 2]; 2],
    pub recovery: [T; 2],
}

impl<T: Real> ExchangePropagator<T> {
    pub fn new(dt_ms: f64, params: &TwoPoolParams) -> Result<Self> {
        if !dt_ms.is_finite() {
            return Err(Error::NonFinite("dt"));
        }
        if dt_ms < 0.0 {
            return Err(Error::InvalidParameter(format!("negative interval {dt_ms} ms")));
        }
        params.validate()?;
        let m = exchange_matrix(dt_ms, params);
        let f = params.f_frac;
        let eq = [1.0 - f, f];
        let recovery = [
            eq[0] - (m[0][0] * eq[0] + m[0][1] * eq[1]),
            eq[1] - (m[1][0] * eq[0] + m[1][1] * eq[1]),
        ];
        Ok(Self {
            e2: T::of((-dt_ms / params.t2_ms).exp()),
            m: [[T::of(m[0][0]), T::of(m[0][1])], [T::of(m[1][0]), T::of(m[1][1])]],
            recovery: [T::of(recovery[0]), T::of(recovery[1])],
        })
    }
}

/// `exp(Λ·dt)` for the coupled longitudinal system, in f64.
pub fn exchange_matrix(dt_ms: f64, params: &TwoPoolParams) -> [[f64; 2]; 2] {
    let e1 = (-dt_ms / params.t1_ms).exp();
    if params.f_frac == 0.0 || params.k_per_s == 0.0 {
        return [[e1, 0.0], [0.0, if params.f_frac == 0.0 { 0.0 } else { e1 }]];
    }
    let ka = params.k_per_s * 1e-3;
    let kb = params.reverse_rate_per_s() * 1e-3;
    let s = ka + kb;
    // (1 - e^{-s t}) / s
    let g = -(-s * dt_ms).exp_m1() / s;
    [[e1 * (1.0 - ka * g), e1 * kb * g], [e1 * ka * g, e1 * (1.0 - kb * g)]]
}

/// Free-pool configuration states plus the bound-pool longitudinal ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPoolSpinConfiguration<T> {
    pub free: SpinConfiguration<T>,
    pub(crate) zb_re: Vec<T>,
    pub(crate) zb_im: Vec<T>,
}

impl<T: Real> TwoPoolSpinConfiguration<T> {
    /// Equilibrium: `Z(0) = 1 - F`, `Zb(0) = F`.
    pub fn new(max_order: usize, f_frac: f64) -> Self {
        let mut zb_re = vec![T::zero(); max_order + 1];
        zb_re[0] = T::of(f_frac);
        Self {
            free: SpinConfiguration::with_equilibrium(max_order, T::of(1.0 - f_frac)),
            zb_re,
            zb_im: vec![T::zero(); max_order + 1],
        }
    }

    pub fn z_bound(&self, k: usize) -> Complex<T> {
        Complex::new(self.zb_re[k], self.zb_im[k])
    }

    pub fn set_z_bound(&mut self, k: usize, v: Complex<T>) {
        self.zb_re[k] = v.re;
        self.zb_im[k] = v.im;
        self.free.active = self.free.active.max(k + 1);
    }

    /// Coupled relaxation and exchange over `dt_ms`.
    pub fn relax_exchange(&mut self, dt_ms: f64, params: &TwoPoolParams) -> Result<()> {
        let p = ExchangePropagator::new(dt_ms, params)?;
        self.apply_exchange(&p);
        Ok(())
    }

    pub fn apply_exchange(&mut self, p: &ExchangePropagator<T>) {
        let n = self.free.active;
        let s = &mut self.free;
        for buf in [&mut s.fp_re, &mut s.fp_im, &mut s.fm_re, &mut s.fm_im] {
            for v in &mut buf[..n] {
                *v = *v * p.e2;
            }
        }
        let [[a, b], [c, d]] = p.m;
        for (za, zb) in [(&mut s.z_re, &mut self.zb_re), (&mut s.z_im, &mut self.zb_im)] {
            let (za, zb) = (&mut za[..n], &mut zb[..n]);
            for k in 0..n {
                let (x, y) = (za[k], zb[k]);
                za[k] = a * x + b * y;
                zb[k] = c * x + d * y;
            }
        }
        s.z_re[0] = s.z_re[0] + p.recovery[0];
        self.zb_re[0] = self.zb_re[0] + p.recovery[1];
    }

    /// Rotates the free pool and saturates the bound pool.
    pub fn two_pool_rf(&mut self, flip_rad: T, phase_rad: T, sat: SaturationSpec) -> Result<()> {
        if !sat.wt.is_finite() || sat.wt < 0.0 {
            return Err(Error::InvalidParameter(format!("saturation exponent {}", sat.wt)));
        }
        self.free.rf_rotate(flip_rad, phase_rad)?;
        self.saturate(T::of(sat.factor()));
        Ok(())
    }

    pub fn apply_rotation(&mut self, r: &Rotation<T>, sat_factor: T) {
        self.free.apply_rotation(r);
        self.saturate(sat_factor);
    }

    /// Multiplies every bound order by `factor`.
    pub fn saturate(&mut self, factor: T) {
        let n = self.free.active;
        for buf in [&mut self.zb_re, &mut self.zb_im] {
            for v in &mut buf[..n] {
                *v = *v * factor;
            }
        }
    }

    /// Inversion: free longitudinal states scaled by `-efficiency`, transverse
    /// states crushed, bound pool saturated by the pulse power.
    pub fn apply_inversion(
        &mut self,
        inv: &InversionSpec,
        b1_scale: f64,
        params: &TwoPoolParams,
    ) -> Result<()> {
        if !(0.0..=1.0).contains(&inv.efficiency) {
            return Err(Error::InvalidParameter(format!("inversion efficiency {}", inv.efficiency)));
        }
        let sat = inv.saturation(b1_scale, params)?;
        self.free.invert_longitudinal(T::of(inv.efficiency));
        self.saturate(T::of(sat.factor()));
        Ok(())
    }

    pub fn grad_shift(&mut self, cycles: i32) {
        self.free.grad_shift(cycles);
    }

    pub fn readout_signal(&self, demod_phase_rad: T) -> Complex<T> {
        self.free.readout_signal(demod_phase_rad)
    }
}
