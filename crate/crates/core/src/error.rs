use std::path::PathBuf;

use num_complex::Complex64;

/// Errors produced by the simulator and the certificate machinery.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hurwitz: eigenvalue {eigenvalue} has nonnegative real part")]
    NotHurwitz { eigenvalue: Complex64 },

    #[error("eigenpair residual {residual:e} exceeds tolerance {tolerance:e}")]
    EigenResidual { residual: f64, tolerance: f64 },

    #[error("Lyapunov solution is not positive definite")]
    NotPositiveDefinite,

    #[error("singular linear system")]
    Singular,

    #[error("history read at t={query} is ahead of newest sample t={newest}")]
    FutureRead { query: f64, newest: f64 },

    #[error("integration produced a non-finite state after t={t}")]
    Blowup { t: f64, last_finite: Vec<f64> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scenario failed validation: {}", .0.join("; "))]
    InvalidScenario(Vec<String>),

    #[error("budget constants undetermined: {}", .0.join(", "))]
    Underdetermined(Vec<String>),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
