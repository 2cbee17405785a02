//! Error type shared across the engine.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Evaluation time outside the grid's domain.
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    /// A path hit a state the model assumptions exclude.
    #[error("model violation at step {step}: {what}")]
    ModelViolation { step: usize, what: String },

    /// A Girsanov shift left its admissible region.
    #[error("inadmissible shift at t = {t}: {what}")]
    InadmissibleShift { t: f64, what: String },

    /// Inputs that do not fit together (wrong grid, wrong coefficient family, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Scalar root solver did not converge.
    #[error("root solver failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
