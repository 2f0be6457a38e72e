//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian within tolerance (max deviation {max_dev})")]
    NotHermitian { max_dev: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: achieved error estimate {achieved}, requested {requested}")]
    QuadratureNonConvergent { achieved: f64, requested: f64 },

    #[error("exponential fit residual {residual} exceeds bound {bound}")]
    FitResidual { residual: f64, bound: f64 },

    #[error("degenerate spectrum: eigenvalue gap {gap} rad/ps below tolerance")]
    DegenerateSpectrum { gap: f64 },

    #[error("ODE step size underflow at t = {t} ps")]
    StepUnderflow { t: f64 },

    #[error("hierarchy of {count} auxiliaries would need ~{estimate_mb} MB, above the {cap_mb} MB cap")]
    MemoryCap {
        count: usize,
        estimate_mb: usize,
        cap_mb: usize,
    },

    #[error("HEOM did not converge by tier {max_tier}: last successive distance {distance}")]
    HeomNotConverged { max_tier: usize, distance: f64 },

    #[error("matrix exponential failed: {0}")]
    MatrixExponential(String),

    #[error("model file error: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
