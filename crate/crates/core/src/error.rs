use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration value (rejected before any simulation starts).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data that cannot be processed (too short, malformed, ...).
    #[error("input error: {0}")]
    Input(String),

    /// A non-finite value reached the modulator loop; the simulation state
    /// is corrupted and the run is aborted.
    #[error("non-finite value in simulation: {0}")]
    NonFinite(String),

    /// Tone-based metrics were requested but no tone stands out of the
    /// in-band noise floor.
    #[error("no signal tone: strongest in-band bin is not 6 dB above the median floor")]
    NoSignalTone,

    /// Parse failure in an external capture file, with the offending line.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
