//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// A configuration key failed validation or could not be parsed.
    #[error("config error for key `{key}`: {message}")]
    Config { key: String, message: String },

    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The dynamics is undefined for the current state (e.g. zero energy
    /// under a nonzero field).
    #[error("degenerate state: {0}")]
    Degenerate(String),

    /// A replica worker failed; carries the key needed to replay it alone.
    #[error("replica {replica} (master_seed {master_seed}) failed: {source}")]
    Replica {
        replica: u32,
        master_seed: u64,
        #[source]
        source: Box<SimError>,
    },

    /// A statistical estimator was asked to run on too small an ensemble.
    #[error("need at least {need} replicas, got {got}")]
    TooFewReplicas { got: usize, need: usize },

    /// Two empirical measures of different sizes were compared.
    #[error("sample counts differ: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    /// A scaling-rate fit could not be performed on the given table.
    #[error("rate fit rejected: {0}")]
    Fit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A text input (config file, history file) could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl SimError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn contract(message: impl Into<String>) -> Self {
        SimError::Contract(message.into())
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
