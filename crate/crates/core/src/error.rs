use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A NaN or infinity reached the plant model.
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("rotor flux {psi} Wb is at or below the flux floor {floor} Wb")]
    FluxFloor { psi: f64, floor: f64 },

    #[error("invalid step size {dt} s: {reason}")]
    InvalidStep { dt: f64, reason: &'static str },

    #[error("invalid configuration at `{key}`: {message}")]
    Config { key: String, message: String },

    /// Every rule fired with zero strength. Unreachable with a covering rule base.
    #[error("fuzzy inference produced no active rule")]
    Inference,

    #[error("contract violation: {0}")]
    Contract(&'static str),

    #[error("simulation diverged at step {step}: {source}")]
    Diverged {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn ensure_finite(what: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}
