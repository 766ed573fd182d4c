//! Front-end error type and the process exit-code contract.

use std::path::PathBuf;

use thiserror::Error;

use mc_core::channel::ChannelError;
use mc_core::reaction::ReactionError;
use mc_core::simulator::SimError;
use mc_core::stability::StabilityError;

/// Exit code for a certified-stable verdict (or a decaying simulation).
pub const EXIT_STABLE: i32 = 0;
/// Exit code for a certified-unstable verdict (or a growing simulation).
pub const EXIT_UNSTABLE: i32 = 10;
/// Exit code when the method refuses to decide (marginal or under-resolved).
pub const EXIT_REFUSED: i32 = 20;
/// Exit code for configuration or runtime errors.
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed config document; the message carries serde's line/column
    /// position and offending key.
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    /// Structurally valid config that fails a semantic check.
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("sweep: {message}")]
    Sweep { message: String, refusal: bool },
}

impl CliError {
    /// Maps failures onto the exit-code contract: refused verdicts exit 20,
    /// everything else is an ordinary error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stability(e) if e.is_refusal() => EXIT_REFUSED,
            CliError::Sweep { refusal: true, .. } => EXIT_REFUSED,
            _ => EXIT_ERROR,
        }
    }
}
