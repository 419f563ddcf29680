//! Normalized RF amplitude shapes.

use serde::{Deserialize, Serialize};

/// Samples used when integrating a waveform numerically.
pub const WAVEFORM_SAMPLES: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfWaveform {
    /// Constant amplitude, non-selective.
    Hard,
    /// Gaussian truncated at ±3σ.
    Gaussian,
    /// Hann-windowed sinc with two zero crossings per side (time-bandwidth 4).
    WindowedSinc,
}

impl RfWaveform {
    /// Time-bandwidth product of the selective shapes.
    pub const SINC_TBW: f64 = 4.0;

    /// Amplitude at normalized time `u ∈ [0, 1]`, peak 1.
    pub fn amplitude(self, u: f64) -> f64 {
        match self {
            RfWaveform::Hard => 1.0,
            RfWaveform::Gaussian => {
                let x = (u - 0.5) * 6.0;
                (-0.5 * x * x).exp()
            }
            RfWaveform::WindowedSinc => {
                let x = (u - 0.5) * Self::SINC_TBW;
                let sinc = if x.abs() < 1e-12 {
                    1.0
                } else {
                    let px = std::f64::consts::PI * x;
                    px.sin() / px
                };
                let hann = 0.5 * (1.0 + (2.0 * std::f64::consts::PI * (u - 0.5)).cos());
                sinc * hann
            }
        }
    }

    /// `n` midpoint samples over the pulse.
    pub fn samples(self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.amplitude((i as f64 + 0.5) / n as f64)).collect()
    }

    /// `∫b² dt / (∫b dt)²` in 1/s for a pulse of `duration_ms`.
    pub fn power_factor(self, duration_ms: f64) -> f64 {
        power_factor(&self.samples(WAVEFORM_SAMPLES), duration_ms)
    }
}

/// `∫b² dt / (∫b dt)²` in 1/s for uniformly sampled amplitudes; zero if the
/// integral vanishes.
pub(crate) fn power_factor(samples: &[f64], duration_ms: f64) -> f64 {
    let dt = duration_ms * 1e-3 / samples.len() as f64;
    let area: f64 = samples.iter().sum::<f64>() * dt;
    let energy: f64 = samples.iter().map(|b| b * b).sum::<f64>() * dt;
    if area == 0.0 {
        0.0
    } else {
        energy / (area * area)
    }
}
