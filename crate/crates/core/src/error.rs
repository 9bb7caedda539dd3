use thiserror::Error;

pub type Result<T> = std::result::Result<T, KtcsError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KtcsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("state is not normalizable: {0}")]
    NonNormalizable(String),

    #[error("truncation n_max={n_max} leaves tail probability {tail:e} (limit {limit:e})")]
    TruncationTooSmall { n_max: usize, tail: f64, limit: f64 },

    #[error("index {index} out of range for K={k}")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("constraint violated: {0}")]
    ConstraintViolated(String),

    #[error("mean occupation {mean:e} too small for a Mandel/CSI ratio")]
    DegenerateMean { mean: f64 },

    #[error("no sign change of the Mandel parameter on (0, {z_hi}]")]
    NoSignChange { z_hi: f64 },

    #[error("argument outside domain: {0}")]
    DomainError(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    #[error("moment n={n}: relative error {rel_err:e} exceeds tolerance {tolerance:e}")]
    MomentMismatch { n: usize, rel_err: f64, tolerance: f64 },

    #[error("time step too large: {0}")]
    StepTooLarge(String),
}

impl KtcsError {
    /// Errors caused by user input rather than by a numerical procedure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            KtcsError::InvalidParams(_)
                | KtcsError::IndexOutOfRange { .. }
                | KtcsError::ConstraintViolated(_)
                | KtcsError::DomainError(_)
                | KtcsError::TruncationTooSmall { .. }
                | KtcsError::NonNormalizable(_)
        )
    }
}
