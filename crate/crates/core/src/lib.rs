pub mod analysis;
pub mod dictionary;
pub mod epg;
pub mod epgx;
pub mod error;
mod fpenv;
pub mod isochromat;
pub mod matcher;
pub mod scalar;
pub mod sequence;
pub mod waveform;

pub use error::{Error, Result};
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type SpinConfig64 = epg::SpinConfiguration<f64>;
pub type SpinConfig32 = epg::SpinConfiguration<f32>;
pub type TwoPoolConfig64 = epgx::TwoPoolSpinConfiguration<f64>;
pub type TwoPoolConfig32 = epgx::TwoPoolSpinConfiguration<f32>;
