use std::io;

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("eigendecomposition of {role} did not converge after {sweeps} sweeps")]
    Decomposition { role: String, sweeps: usize },
    #[error("{role} is ill-conditioned: smallest eigenvalue {min} vs largest {max}")]
    Conditioning { role: String, min: f64, max: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("probability vector is not on the simplex: {0}")]
    Simplex(String),
    #[error("corrupted particle state: {0}")]
    Corrupted(String),
    #[error("predictor `{name}` value {value} outside basis range [{lo}, {hi}]")]
    Range {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("response {y} outside the support of the {family} family")]
    Support { family: &'static str, y: f64 },
    #[error("input line {line}: {message}")]
    Ingest { line: usize, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("warm-up tuning failed after {attempts} attempt(s); last max gap {max_gap:.3}")]
    Tuning {
        attempts: usize,
        max_gap: f64,
        report: Box<crate::warmup::ConvergenceReport>,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Process exit codes for the command-line front end.
pub mod exit {
    pub const OK: u8 = 0;
    pub const IO: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const INGEST: u8 = 3;
    pub const TUNING: u8 = 4;
    pub const NUMERICAL: u8 = 5;
}

impl Error {
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io(_) | Error::Json(_) | Error::Checkpoint(_) => exit::IO,
            Error::Config(_) | Error::InvalidParameter(_) => exit::USAGE,
            Error::Ingest { .. } | Error::Support { .. } | Error::Range { .. } => exit::INGEST,
            Error::Tuning { .. } => exit::TUNING,
            Error::Dimension { .. }
            | Error::Decomposition { .. }
            | Error::Conditioning { .. }
            | Error::Simplex(_)
            | Error::Corrupted(_) => exit::NUMERICAL,
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}
