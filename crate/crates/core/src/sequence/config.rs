//! Schedule description file (JSON). Unknown fields are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::RfWaveform;

/// Inter-segment gap length in TR slots.
pub const DEFAULT_GAP_SLOTS: usize = 50;
pub const DEFAULT_SEGMENT_PULSES: usize = 350;
pub const DEFAULT_TR_MS: f64 = 7.5;
pub const FLASH_PHASE_INCREMENT_DEG: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentType {
    Fisp,
    Flash,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipShape {
    /// `max·sin(π(n+1)/(count+1))`, rising from and returning toward zero.
    HalfSine,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlipGenerator {
    pub shape: FlipShape,
    pub max_deg: f64,
    pub count: usize,
}

impl FlipGenerator {
    pub fn flips(&self) -> Vec<f64> {
        match self.shape {
            FlipShape::Constant => vec![self.max_deg; self.count],
            FlipShape::HalfSine => (0..self.count)
                .map(|n| {
                    let u = (n + 1) as f64 / (self.count + 1) as f64;
                    self.max_deg * (std::f64::consts::PI * u).sin()
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    #[serde(rename = "type")]
    pub kind: SegmentType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flips_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<FlipGenerator>,
    /// Quadratic RF-phase increment; 0 gives a constant phase.
    pub phase_increment_deg: f64,
}

impl SegmentConfig {
    pub fn generated(kind: SegmentType, max_deg: f64, count: usize) -> Self {
        Self {
            kind,
            flips_deg: None,
            generator: Some(FlipGenerator { shape: FlipShape::HalfSine, max_deg, count }),
            phase_increment_deg: match kind {
                SegmentType::Fisp => 0.0,
                SegmentType::Flash => FLASH_PHASE_INCREMENT_DEG,
            },
        }
    }

    /// Per-pulse flip angles in degrees.
    pub fn flips(&self) -> Result<Vec<f64>> {
        match (&self.flips_deg, &self.generator) {
            (Some(f), None) => Ok(f.clone()),
            (None, Some(g)) => Ok(g.flips()),
            _ => Err(Error::Config("segment needs exactly one of flips_deg or generator".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtPulseConfig {
    pub flip_deg: f64,
    pub duration_ms: f64,
    pub offset_hz: f64,
    pub waveform: RfWaveform,
}

impl Default for MtPulseConfig {
    fn default() -> Self {
        Self { flip_deg: 180.0, duration_ms: 7.0, offset_hz: 5000.0, waveform: RfWaveform::Gaussian }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    pub slots: usize,
    /// One MT pulse per slot when present.
    pub mt_pulse: Option<MtPulseConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    pub duration_ms: f64,
    pub efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationConfig {
    pub waveform: RfWaveform,
    pub duration_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub tr_ms: f64,
    pub inversion: InversionConfig,
    pub segments: Vec<SegmentConfig>,
    pub gaps: Vec<GapConfig>,
    pub excitation: ExcitationConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceKind {
    Irff,
    IrffMt,
}

impl SequenceKind {
    pub fn has_mt_pulses(self) -> bool {
        matches!(self, SequenceKind::IrffMt)
    }
}

impl ScheduleConfig {
    /// FISP, FISP, FLASH, FLASH with half-sine trains peaking at 30°, 60°, 30°, 60°.
    pub fn irff(with_mt_pulses: bool) -> Self {
        Self::irff_with_length(DEFAULT_SEGMENT_PULSES, with_mt_pulses)
    }

    pub fn irff_with_length(pulses_per_segment: usize, with_mt_pulses: bool) -> Self {
        use SegmentType::*;
        let segments = [(Fisp, 30.0), (Fisp, 60.0), (Flash, 30.0), (Flash, 60.0)]
            .into_iter()
            .map(|(k, max)| SegmentConfig::generated(k, max, pulses_per_segment))
            .collect();
        let gap = |mt: bool| GapConfig {
            slots: DEFAULT_GAP_SLOTS,
            mt_pulse: mt.then(MtPulseConfig::default),
        };
        Self {
            tr_ms: DEFAULT_TR_MS,
            inversion: InversionConfig { duration_ms: 10.0, efficiency: 1.0 },
            segments,
            gaps: vec![gap(with_mt_pulses), gap(with_mt_pulses), gap(false)],
            excitation: ExcitationConfig { waveform: RfWaveform::WindowedSinc, duration_ms: 1.0 },
        }
    }

    pub fn for_kind(kind: SequenceKind) -> Self {
        Self::irff(kind.has_mt_pulses())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.tr_ms.is_finite() && self.tr_ms > 0.0) {
            return bad(format!("tr_ms must be positive, got {}", self.tr_ms));
        }
        if !(self.inversion.duration_ms > 0.0) || !(0.0..=1.0).contains(&self.inversion.efficiency) {
            return bad("inversion needs duration_ms > 0 and efficiency in [0, 1]".into());
        }
        if !(self.excitation.duration_ms > 0.0) {
            return bad("excitation duration_ms must be positive".into());
        }
        if self.segments.is_empty() {
            return bad("at least one segment is required".into());
        }
        if self.gaps.len() + 1 != self.segments.len() {
            return bad(format!(
                "{} segments need {} gaps, got {}",
                self.segments.len(),
                self.segments.len() - 1,
                self.gaps.len()
            ));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            let flips = seg.flips()?;
            if flips.is_empty() {
                return bad(format!("segment {i} has no pulses"));
            }
            if let Some(g) = &seg.generator {
                if !(g.max_deg > 0.0 && g.max_deg <= 90.0) {
                    return bad(format!("segment {i} max flip {} outside (0, 90]", g.max_deg));
                }
            }
            if flips.iter().any(|f| !f.is_finite() || *f < 0.0 || *f > 180.0) {
                return bad(format!("segment {i} has flip angles outside [0, 180]"));
            }
            if !seg.phase_increment_deg.is_finite() {
                return bad(format!("segment {i} phase increment is not finite"));
            }
        }
        for (i, gap) in self.gaps.iter().enumerate() {
            if let Some(mt) = &gap.mt_pulse {
                if mt.offset_hz == 0.0 || !mt.offset_hz.is_finite() {
                    return bad(format!("gap {i}: MT pulses must be off resonance"));
                }
                if !(mt.duration_ms > 0.0) || !(mt.flip_deg >= 0.0) {
                    return bad(format!("gap {i}: invalid MT pulse"));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_stable() {
        let cfg = ScheduleConfig::irff(true);
        let text = cfg.to_json().unwrap();
        let back = ScheduleConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v: serde_json::Value = serde_json::to_value(ScheduleConfig::irff(false)).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(ScheduleConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::to_value(ScheduleConfig::irff(false)).unwrap();
        v["segments"][0]["extra"] = serde_json::json!(true);
        assert!(ScheduleConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn explicit_flip_list_is_accepted() {
        let mut cfg = ScheduleConfig::irff(false);
        cfg.segments[0].generator = None;
        cfg.segments[0].flips_deg = Some(vec![5.0, 10.0, 15.0]);
        let text = cfg.to_json().unwrap();
        let back = ScheduleConfig::from_json(&text).unwrap();
        assert_eq!(back.segments[0].flips().unwrap(), vec![5.0, 10.0, 15.0]);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ScheduleConfig::irff(false);
        cfg.segments[1].generator.as_mut().unwrap().max_deg = 120.0;
        assert!(cfg.validate().is_err());

        let mut cfg = ScheduleConfig::irff(false);
        cfg.segments[2].generator.as_mut().unwrap().count = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = ScheduleConfig::irff(false);
        cfg.gaps.pop();
        assert!(cfg.validate().is_err());

        let mut cfg = ScheduleConfig::irff(false);
        cfg.segments[0].flips_deg = Some(vec![10.0]);
        assert!(cfg.validate().is_err());

        let mut cfg = ScheduleConfig::irff(true);
        cfg.gaps[0].mt_pulse.as_mut().unwrap().offset_hz = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn half_sine_peaks_at_max() {
        let g = FlipGenerator { shape: FlipShape::HalfSine, max_deg: 60.0, count: 351 };
        let f = g.flips();
        assert!((f[175] - 60.0).abs() < 1e-12);
        assert!(f.iter().all(|v| *v > 0.0 && *v <= 60.0));
    }
}
