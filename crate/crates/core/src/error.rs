use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("integration diverged at step {step} ({context})")]
    Diverged { step: usize, context: String },

    #[error("autocorrelation never decays to half its lag-zero value within {max_lag} lags")]
    TimescaleUndefined { max_lag: usize },

    #[error("adjacency construction failed: largest eigenvalue {0} is not negative")]
    Construction(f64),

    #[error("shift {shift} of node {node} reaches outside the recorded window")]
    BufferExceeded { node: usize, shift: f64 },

    #[error("target signal has zero variance")]
    ZeroVariance,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            Error::Diverged { .. } | Error::Numerical(_) => 3,
            _ => 1,
        }
    }
}
