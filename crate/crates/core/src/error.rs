use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside the potential's domain: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("box too small: ground-state weight {weight:.3e} within the wall layer exceeds {limit:.1e}")]
    BoxTooSmall { weight: f64, limit: f64 },

    #[error("spectrum truncated: need states up to E = {needed:.6} but highest computed is {available:.6}")]
    TruncatedSpectrum { needed: f64, available: f64 },

    #[error("amplitude table is empty after applying floor {floor:e}")]
    DegenerateTable { floor: f64 },

    #[error("imaginary-time integration failed: {0}")]
    Integration(String),

    #[error("boundary-value solver did not converge after {iterations} iterations (best residual {residual:.3e})")]
    SolverNoConvergence { iterations: usize, residual: f64 },

    #[error("rank-deficient Jacobian (condition {condition:.3e}); null direction {null_direction:?}")]
    DegenerateFit {
        condition: f64,
        null_direction: Vec<(String, f64)>,
    },

    #[error("ground state is not single-peaked ({maxima} local maxima)")]
    NotSingleWell { maxima: usize },

    #[error("parameters do not describe a double well: {0}")]
    NotDoubleWell(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("integrator instability: relative energy drift {drift:.3e} at t = {time:.4}")]
    IntegratorInstability { drift: f64, time: f64 },

    #[error("energy {energy} lies below the potential minimum on the section (empty shell)")]
    EnergyTooLow { energy: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
