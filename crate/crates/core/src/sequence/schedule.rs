//! Slot timeline built from a [`ScheduleConfig`].

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ScheduleConfig, SegmentType};
use crate::error::Result;
use crate::waveform::RfWaveform;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Excitation,
    Inversion,
    MtOffres,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    pub kind: PulseKind,
    pub flip_deg: f64,
    pub phase_deg: f64,
    pub duration_ms: f64,
    pub offset_hz: f64,
    pub waveform: RfWaveform,
    pub readout: bool,
    pub demod_phase_deg: f64,
}

/// One TR interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub pulse: Option<PulseEvent>,
    /// Gradient dephasing applied at the end of the slot, in cycles.
    pub shift: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpan {
    pub kind: SegmentType,
    pub first_slot: usize,
    pub first_readout: usize,
    pub pulses: usize,
}

impl SegmentSpan {
    pub fn readouts(&self) -> std::ops::Range<usize> {
        self.first_readout..self.first_readout + self.pulses
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub tr_ms: f64,
    pub inversion_efficiency: f64,
    pub slots: Vec<Slot>,
    pub segments: Vec<SegmentSpan>,
    pub total_readouts: usize,
}

/// Quadratic RF-spoiling phase `inc·n(n+1)/2`, reduced to `[0, 360)`.
pub fn rf_spoil_phase(n: usize, increment_deg: f64) -> f64 {
    let tri = (n as u64 * (n as u64 + 1) / 2) as f64;
    (increment_deg * tri).rem_euclid(360.0)
}

/// Builds the slot list: inversion, then segments separated by gaps.
///
/// `with_mt_pulses = false` strips MT pulses from the gaps regardless of the
/// config; `true` keeps whatever the config specifies.
pub fn build_irff(config: &ScheduleConfig, with_mt_pulses: bool) -> Result<Schedule> {
    config.validate()?;
    let mut slots = Vec::new();
    let mut segments = Vec::new();
    let inv = &config.inversion;
    slots.push(Slot {
        pulse: Some(PulseEvent {
            kind: PulseKind::Inversion,
            flip_deg: 180.0,
            phase_deg: 0.0,
            duration_ms: inv.duration_ms,
            offset_hz: 0.0,
            waveform: RfWaveform::Hard,
            readout: false,
            demod_phase_deg: 0.0,
        }),
        shift: 0,
    });
    let mut readouts = 0;
    for (i, seg) in config.segments.iter().enumerate() {
        let flips = seg.flips()?;
        segments.push(SegmentSpan {
            kind: seg.kind,
            first_slot: slots.len(),
            first_readout: readouts,
            pulses: flips.len(),
        });
        for (n, &flip) in flips.iter().enumerate() {
            let phase = rf_spoil_phase(n, seg.phase_increment_deg);
            slots.push(Slot {
                pulse: Some(PulseEvent {
                    kind: PulseKind::Excitation,
                    flip_deg: flip,
                    phase_deg: phase,
                    duration_ms: config.excitation.duration_ms,
                    offset_hz: 0.0,
                    waveform: config.excitation.waveform,
                    readout: true,
                    demod_phase_deg: phase,
                }),
                shift: 1,
            });
        }
        readouts += flips.len();
        if let Some(gap) = config.gaps.get(i) {
            let mt = gap.mt_pulse.as_ref().filter(|_| with_mt_pulses);
            for _ in 0..gap.slots {
                let pulse = mt.map(|m| PulseEvent {
                    kind: PulseKind::MtOffres,
                    flip_deg: m.flip_deg,
                    phase_deg: 0.0,
                    duration_ms: m.duration_ms,
                    offset_hz: m.offset_hz,
                    waveform: m.waveform,
                    readout: false,
                    demod_phase_deg: 0.0,
                });
                slots.push(Slot { pulse, shift: 0 });
            }
        }
    }
    Ok(Schedule {
        tr_ms: config.tr_ms,
        inversion_efficiency: inv.efficiency,
        slots,
        segments,
        total_readouts: readouts,
    })
}

impl Schedule {
    pub fn pulses(&self) -> impl Iterator<Item = &PulseEvent> {
        self.slots.iter().filter_map(|s| s.pulse.as_ref())
    }

    pub fn mt_pulse_count(&self) -> usize {
        self.pulses().filter(|p| p.kind == PulseKind::MtOffres).count()
    }

    /// Largest excitation flip, degrees.
    pub fn max_flip_deg(&self) -> f64 {
        self.pulses()
            .filter(|p| p.kind == PulseKind::Excitation)
            .map(|p| p.flip_deg)
            .fold(0.0, f64::max)
    }

    pub fn excitation_waveform(&self) -> RfWaveform {
        self.pulses()
            .find(|p| p.kind == PulseKind::Excitation)
            .map(|p| p.waveform)
            .unwrap_or(RfWaveform::Hard)
    }

    /// Compact JSON used for hashing; identical schedules give identical bytes.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("schedule serializes")
    }

    /// Hex SHA-256 of [`Schedule::canonical_json`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
