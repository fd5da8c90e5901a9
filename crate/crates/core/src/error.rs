use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CmmError>;

#[derive(Debug, Error)]
pub enum CmmError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no root in bracket [{lo}, {hi}]: F(lo) = {f_lo:e}, F(hi) = {f_hi:e}")]
    RootNotFound { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("numerical blow-up at step {step}: {detail}")]
    BlowUp { step: usize, detail: String },

    #[error("invalid state: {0}")]
    State(String),

    #[error("submap stack exceeded its cap of {cap} maps at t = {t}")]
    StackCap { cap: usize, t: f64 },

    #[error("distribution left the velocity band at t = {t}: mass {mass:e} outside")]
    SupportExit { t: f64, mass: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CmmError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CmmError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the numerics rather than by the caller.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CmmError::BlowUp { .. }
                | CmmError::StackCap { .. }
                | CmmError::SupportExit { .. }
                | CmmError::RootNotFound { .. }
        )
    }
}
