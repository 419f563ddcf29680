//! Through-slice excitation profile of a selective pulse.
//!
//! Positions are expressed as off-resonance `ν` in cycles per pulse duration,
//! so the profile of a given shape does not depend on the pulse length. Bins
//! cover `0..span` on one side of the slice; the other side is taken as the
//! mirror image.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::RfWaveform;

pub const DEFAULT_PROFILE_BINS: usize = 16;
/// Integration steps across the pulse.
const PROFILE_STEPS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileBin {
    /// Effective flip relative to nominal, with the axis phase offset as argument.
    pub scale: Complex<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceProfile {
    pub bins: Vec<ProfileBin>,
}

impl SliceProfile {
    /// `n_bins` identical unit bins: the profile of a non-selective pulse.
    pub fn uniform(n_bins: usize) -> Self {
        let w = 1.0 / n_bins as f64;
        Self { bins: vec![ProfileBin { scale: Complex::new(1.0, 0.0), weight: w }; n_bins] }
    }

    /// Weighted mean of `|scale|`.
    pub fn mean_flip_scale(&self) -> f64 {
        self.bins.iter().map(|b| b.weight * b.scale.norm()).sum()
    }

    /// Distinct scales with their summed weights, in first-seen order.
    pub(crate) fn grouped(&self) -> Vec<ProfileBin> {
        let mut out: Vec<ProfileBin> = Vec::new();
        for b in &self.bins {
            match out.iter_mut().find(|o| o.scale == b.scale) {
                Some(o) => o.weight += b.weight,
                None => out.push(*b),
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins.is_empty() {
            return Err(Error::InvalidParameter("slice profile has no bins".into()));
        }
        if self.bins.iter().any(|b| !b.scale.re.is_finite() || !b.scale.im.is_finite() || !(b.weight >= 0.0)) {
            return Err(Error::InvalidParameter("slice profile has invalid bins".into()));
        }
        let total: f64 = self.bins.iter().map(|b| b.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("slice profile weights sum to {total}")));
        }
        Ok(())
    }
}

/// Off-resonance extent covered by the bins, in cycles per pulse: twice the
/// nominal half-width, so the transition band is included.
fn profile_span(waveform: RfWaveform) -> f64 {
    match waveform {
        RfWaveform::WindowedSinc => RfWaveform::SINC_TBW,
        RfWaveform::Gaussian => 3.0,
        RfWaveform::Hard => 0.0,
    }
}

/// Bin scales of `waveform` at `nominal_flip_deg`, by small-step rotation of
/// the magnetization at each bin's off-resonance followed by a refocusing
/// phase of half the pulse's precession.
pub fn compute_slice_profile(waveform: RfWaveform, nominal_flip_deg: f64, n_bins: usize) -> Result<SliceProfile> {
    if n_bins == 0 {
        return Err(Error::InvalidParameter("n_bins must be positive".into()));
    }
    if !(nominal_flip_deg > 0.0 && nominal_flip_deg < 180.0) {
        return Err(Error::InvalidParameter(format!("nominal flip {nominal_flip_deg}° outside (0, 180)")));
    }
    if waveform == RfWaveform::Hard {
        return Ok(SliceProfile::uniform(n_bins));
    }
    let alpha = nominal_flip_deg.to_radians();
    let samples = waveform.samples(PROFILE_STEPS);
    let area: f64 = samples.iter().sum();
    let rf: Vec<f64> = samples.iter().map(|b| alpha * b / area).collect();
    let span = profile_span(waveform);
    let w = 1.0 / n_bins as f64;
    let bins = (0..n_bins)
        .map(|i| {
            let nu = (i as f64 + 0.5) / n_bins as f64 * span;
            let m = excite(&rf, nu);
            let mxy = Complex::new(m[0], m[1]) * Complex::from_polar(1.0, -std::f64::consts::PI * nu);
            let eff = mxy.norm().atan2(m[2]);
            // rotation about azimuth φ takes +z to -i·sin(α)·e^{iφ}
            let phi = (Complex::<f64>::i() * mxy).arg();
            ProfileBin { scale: Complex::from_polar(eff / alpha, phi), weight: w }
        })
        .collect();
    Ok(SliceProfile { bins })
}

/// Magnetization after the pulse, starting from +z, with precession of
/// `nu` cycles over the pulse.
fn excite(rf: &[f64], nu: f64) -> [f64; 3] {
    let wz = 2.0 * std::f64::consts::PI * nu / rf.len() as f64;
    let mut m = [0.0, 0.0, 1.0];
    for &wx in rf {
        m = rotate(m, [wx, 0.0, wz]);
    }
    m
}

/// Right-handed rotation of `v` by the rotation vector `w`.
fn rotate(v: [f64; 3], w: [f64; 3]) -> [f64; 3] {
    let angle = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    if angle == 0.0 {
        return v;
    }
    let u = [w[0] / angle, w[1] / angle, w[2] / angle];
    let (s, c) = angle.sin_cos();
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    [
        v[0] * c + cross[0] * s + u[0] * dot * (1.0 - c),
        v[1] * c + cross[1] * s + u[1] * dot * (1.0 - c),
        v[2] * c + cross[2] * s + u[2] * dot * (1.0 - c),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hard_profile_is_unit() {
        let p = compute_slice_profile(RfWaveform::Hard, 60.0, 16).unwrap();
        assert_eq!(p.bins.len(), 16);
        assert!(p.bins.iter().all(|b| b.scale == Complex::new(1.0, 0.0)));
        p.validate().unwrap();
    }

    #[test]
    fn center_bin_is_near_nominal() {
        for w in [RfWaveform::WindowedSinc, RfWaveform::Gaussian] {
            for flip in [10.0, 30.0, 60.0, 90.0] {
                let p = compute_slice_profile(w, flip, 16).unwrap();
                p.validate().unwrap();
                let c = p.bins[0].scale;
                assert!((c.norm() - 1.0).abs() < 0.01, "{w:?} {flip}: {c}");
                assert!(c.arg().abs() < 0.05, "{w:?} {flip}: {c}");
            }
        }
    }

    #[test]
    fn sinc_profile_falls_off() {
        let p = compute_slice_profile(RfWaveform::WindowedSinc, 60.0, 16).unwrap();
        assert!(p.mean_flip_scale() < 1.0);
        assert!(p.bins[15].scale.norm() < 0.05);
        let mags: Vec<f64> = p.bins.iter().map(|b| b.scale.norm()).collect();
        assert!(mags[0] > mags[8] && mags[8] > mags[12]);
    }

    #[test]
    fn on_resonance_rotation_matches_flip() {
        let rf = vec![std::f64::consts::FRAC_PI_2 / 100.0; 100];
        let m = excite(&rf, 0.0);
        assert!((m[0]).abs() < 1e-12 && (m[1] + 1.0).abs() < 1e-12 && m[2].abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(compute_slice_profile(RfWaveform::WindowedSinc, 0.0, 16).is_err());
        assert!(compute_slice_profile(RfWaveform::WindowedSinc, 180.0, 16).is_err());
        assert!(compute_slice_profile(RfWaveform::WindowedSinc, 30.0, 0).is_err());
    }

    #[test]
    fn grouping_merges_identical_bins() {
        let g = SliceProfile::uniform(16).grouped();
        assert_eq!(g.len(), 1);
        assert!((g[0].weight - 1.0).abs() < 1e-15);
    }
}
