//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by environment construction, training, oracles, and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor was given parameters that cannot produce a valid
    /// environment or configuration.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// A caller violated an operation's precondition (wrong discriminator
    /// kind, stepping from a terminal state, empty input, ...).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// A numerical update produced a non-finite value. The message carries
    /// diagnostics (where, and with which inputs).
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// File or text could not be parsed as a config, manifest, environment,
    /// checkpoint, or log.
    #[error("parse error: {0}")]
    Parse(String),

    /// A filesystem operation failed; the message names the path.
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
