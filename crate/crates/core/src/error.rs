use thiserror::Error;

/// Errors surfaced by the engine, the simulator and the file interfaces.
#[derive(Debug, Error)]
pub enum Error {
    #[error("value out of representable range: {0}")]
    Range(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("fixed-point scale mismatch: expected {expected}, got {got}")]
    Scale { expected: u32, got: u32 },

    #[error("share corruption: overlapping summand disagrees ({0})")]
    ShareCorruption(String),

    #[error("transport failure: {0}")]
    Transport(String),

    #[error("session handshake failed: {0}")]
    Handshake(String),

    #[error("protocol desync: {0}")]
    Desync(String),

    #[error("bad frame: {0}")]
    Frame(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },

    #[error("command validation failed: {0}")]
    Validation(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),
}

pub type Result<T> = std::result::Result<T, Error>;
