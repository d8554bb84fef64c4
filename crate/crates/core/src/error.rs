//! Error type shared across the crate.

use thiserror::Error;

/// Unified error for library and CLI operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix/vector dimensions are inconsistent for the requested operation.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A value failed a construction invariant (non-finite entry, empty
    /// matrix, bad parameter range, malformed graph, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// A linear system's matrix is numerically singular at the working
    /// tolerance; carries the detected rank.
    #[error("singular matrix (detected rank {rank} of {n})")]
    Singular { rank: usize, n: usize },

    /// Random graph generation exhausted its retry budget.
    #[error("graph generation failed: {0}")]
    Generation(String),

    /// The root finder did not meet its residual target; carries the final
    /// per-root residuals.
    #[error("root finding did not converge after {iterations} iterations (residuals {residuals:?})")]
    RootFinding {
        iterations: usize,
        residuals: Vec<f64>,
    },

    /// The Lyapunov value increased between samples: the step size is too
    /// large for this system's stiffness.
    #[error(
        "Lyapunov value rose from {previous:.6e} to {current:.6e} at t={t:.6}; \
         the flow guarantees decay, so reduce the step size h"
    )]
    StepSize { t: f64, previous: f64, current: f64 },

    /// The integrator produced a non-finite state.
    #[error("integration diverged at t={t:.6} (non-finite state)")]
    Divergence { t: f64 },

    /// Configuration file problems: unreadable, unparsable, or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 singular system, 4
    /// integration failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Invalid(_) => 2,
            Error::Singular { .. } => 3,
            Error::StepSize { .. } | Error::Divergence { .. } => 4,
            _ => 1,
        }
    }
}
