//! Error type shared across the simulator.

use crate::kernel::SimTime;

/// Errors raised by the kernel, model loading, configuration and simulation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An event was scheduled before the current simulation time.
    #[error("schedule at {at} ps violates current time {now} ps")]
    TimeViolation { at: SimTime, now: SimTime },

    /// Too many deliveries at a single timestamp, i.e. a zero-delay loop.
    #[error("delivery cap of {cap} exceeded at {at} ps (combinational loop?)")]
    TimeLoop { at: SimTime, cap: u64 },

    /// A model file field is malformed or inconsistent.
    #[error("model field `{field}`: {message}")]
    Model { field: String, message: String },

    /// Vector lengths or model dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Operation applied to the wrong model variant.
    #[error("variant mismatch: {0}")]
    VariantMismatch(String),

    /// Invalid run or timing configuration.
    #[error("config: {0}")]
    Config(String),

    /// A dataset row could not be parsed.
    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },

    /// The four-phase interface never saw completion within the timeout.
    #[error("deadlock: no completion within {timeout} ps of pulse at {at} ps")]
    Deadlock { at: SimTime, timeout: u64 },

    /// A simulator self-check failed; indicates a bug, never bad data.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn model(field: &str, message: impl Into<String>) -> Self {
        Error::Model {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
