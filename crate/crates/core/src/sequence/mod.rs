//! IRFF / IRFF-MT schedules, slice profiles and fingerprint simulation.

pub mod config;
pub mod schedule;
pub mod simulate;
pub mod slice_profile;

pub use config::{
    ExcitationConfig, FlipGenerator, FlipShape, GapConfig, InversionConfig, MtPulseConfig, ScheduleConfig,
    SegmentConfig, SegmentType, SequenceKind,
};
pub use schedule::{build_irff, rf_spoil_phase, PulseEvent, PulseKind, Schedule, SegmentSpan, Slot};
pub use simulate::{simulate_fingerprint, SignalModel, SimulationOptions, Simulator};
pub use slice_profile::{compute_slice_profile, ProfileBin, SliceProfile, DEFAULT_PROFILE_BINS};
