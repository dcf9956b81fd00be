use std::path::PathBuf;

use thiserror::Error;

use crate::grid::PowerProfile;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("pump target unreachable at EDFA {edfa}: target {target_mw:.6e} mW outside [{min_mw:.6e}, {max_mw:.6e}] mW")]
    PumpUnreachable {
        edfa: usize,
        target_mw: f64,
        min_mw: f64,
        max_mw: f64,
    },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("non-finite value at stage {stage}: {what}")]
    Numeric { stage: usize, what: String },

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("fixed-point iteration did not converge (best deviation {deviation_db:.4} dB)")]
    NonConvergence {
        best: Box<PowerProfile>,
        deviation_db: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Re-tag a pump error with the index of the amplifier in the chain.
    pub(crate) fn at_edfa(self, index: usize) -> Self {
        match self {
            Error::PumpUnreachable {
                target_mw,
                min_mw,
                max_mw,
                ..
            } => Error::PumpUnreachable {
                edfa: index,
                target_mw,
                min_mw,
                max_mw,
            },
            other => other,
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Io(_) | Error::Data(_) => 1,
            _ => 2,
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
