use std::io;

/// Errors produced anywhere in the simulation, dictionary and matching pipeline.
#[derive(thiserror::Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("unsupported event: {0}")]
    UnsupportedEvent(String),

    #[error("invalid schedule config: {0}")]
    Config(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("schedule hash mismatch: dictionary {dictionary}, query {query}")]
    ScheduleMismatch { dictionary: String, query: String },

    #[error("zero-norm signal")]
    ZeroSignal,

    #[error("simulation failed for tuple (t1={t1_ms} ms, t2={t2_ms} ms, b1={b1}, f={f_frac}): {reason}")]
    Simulation {
        t1_ms: f64,
        t2_ms: f64,
        b1: f64,
        f_frac: f64,
        reason: String,
    },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("unsupported format version {found} (this build reads major version {supported})")]
    Version { found: u16, supported: u16 },

    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    Checksum { stored: u64, computed: u64 },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
