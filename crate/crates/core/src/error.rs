use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every fallible operation in the crate reports one of these.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("source generation failed: {0}")]
    Generation(String),

    #[error("stream starved after {rejections} consecutive rejections waiting for {what}")]
    Starvation { what: String, rejections: u64 },

    #[error("degenerate chord (length {length:e})")]
    DegenerateChord { length: f64 },

    #[error("thin body: {0}")]
    ThinBody(String),

    #[error("no interior point with slack >= {target:e} (best {best:e} after {iterations} iterations)")]
    InfeasibleOrThin {
        target: f64,
        best: f64,
        iterations: usize,
    },

    #[error("boosting stalled at round {round}: {reason}")]
    BoostStall { round: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn starved(what: impl Into<String>, rejections: u64) -> Self {
        Error::Starvation {
            what: what.into(),
            rejections,
        }
    }

    /// Process exit code for scripted pipelines.
    ///
    /// 1 = config, 2 = starvation, 3 = thin body, 4 = boost stall.
    /// Code 5 (acceptance failure) is produced by the harness, not by an error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Starvation { .. } => 2,
            Error::DegenerateChord { .. } | Error::ThinBody(_) | Error::InfeasibleOrThin { .. } => 3,
            Error::BoostStall { .. } => 4,
            _ => 1,
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
