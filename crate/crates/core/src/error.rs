use thiserror::Error;

/// Errors raised by the numerical core and the command-line driver.
///
/// Time stamps are carried as `f64` regardless of the scalar type used for
/// the computation so that errors stay non-generic.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:e}); the bound `a` is too small")]
    PsdViolation { min_eigenvalue: f64 },

    #[error("integration failed at t = {t}: step size {step:e} underflowed")]
    StepUnderflow { t: f64, step: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("amplitude c(t) vanishes at t = {t} (|c| = {modulus:e}); the time-local rates diverge")]
    AmplitudeZero { t: f64, modulus: f64 },

    #[error("accuracy check failed at t = {t}: {reason}")]
    Accuracy { t: f64, reason: String },

    #[error("tr W12 = {value:e} at t = {t} is below the extraction floor")]
    DenominatorUnderflow { t: f64, value: f64 },

    #[error("ratio estimator ill-conditioned at t = {t}: |mean denominator| = {value:e}")]
    IllConditioned { t: f64, value: f64 },

    #[error("internal logic error: {0}")]
    Logic(String),

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// True for errors that originate from bad user input rather than from
    /// the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Validation(_) | Error::Dimension { .. } | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
