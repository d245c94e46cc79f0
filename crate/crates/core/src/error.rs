use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid orbit specification: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("trajectory too short: need {needed} samples, have {have}")]
    TooShort { needed: usize, have: usize },

    /// The integrated state left the admissible region or became non-finite.
    #[error("integration diverged at step {step}")]
    Diverged { step: usize },

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("state is not on a periodic orbit: return residual {residual:e} exceeds {tolerance:e}")]
    NotOnCycle { residual: f64, tolerance: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("adjacency draw failed: spectral radius below threshold after {attempts} attempts")]
    DegenerateAdjacency { attempts: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidSpec(_) => 2,
            _ => 3,
        }
    }
}
