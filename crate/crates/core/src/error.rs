use thiserror::Error;

/// Errors raised by the simulation and statistics layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("inverse iteration did not converge after {iterations} steps (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("phase step of {jump:.3} rad at t = {time:.4} exceeds the guard; use a smaller dt")]
    StepSize { time: f64, jump: f64 },

    #[error("terminal phase not monotone in kappa near {kappa:.6}; use a smaller dt")]
    NonMonotone { kappa: f64 },

    #[error("statistical precondition unmet: {0}")]
    Statistical(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("realization {index}: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => 2,
            Error::Invariant(_)
            | Error::NoConvergence { .. }
            | Error::StepSize { .. }
            | Error::NonMonotone { .. } => 3,
            Error::Statistical(_) => 4,
            Error::Realization { source, .. } => source.exit_code(),
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
