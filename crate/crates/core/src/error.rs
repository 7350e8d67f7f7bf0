//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Clone, Error)]
pub enum CoreError {
    #[error("not Hermitian: asymmetry {asymmetry:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { asymmetry: f64, tol: f64 },

    #[error("dimension mismatch ({context}): {left} vs {right}")]
    DimensionMismatch {
        left: usize,
        right: usize,
        context: String,
    },

    #[error("non-commuting tuple: operators {i} and {j}, commutator norm {norm:.3e} > {tol:.3e}")]
    NonCommuting { i: usize, j: usize, norm: f64, tol: f64 },

    #[error("scalar function undefined at eigenvalue {eigenvalue}: {detail}")]
    Domain { eigenvalue: f64, detail: String },

    #[error("positivity violated for {what}: min eigenvalue {min_eig:.6e}")]
    Positivity { what: String, min_eig: f64 },

    #[error("sign precondition failed for {what}: offending eigenvalue {eigenvalue:.6e}")]
    SignPrecondition { what: String, eigenvalue: f64 },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(
        "fit budget exhausted: best gap {best_gap:.3e} > epsilon {epsilon:.3e} \
         (N schedule {schedule:?}, gaps {gaps:?})"
    )]
    FitBudget {
        best_gap: f64,
        epsilon: f64,
        schedule: Vec<usize>,
        gaps: Vec<f64>,
    },
}

impl CoreError {
    /// Numerical precondition failures, as opposed to malformed input.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            CoreError::NotHermitian { .. }
                | CoreError::NonCommuting { .. }
                | CoreError::Domain { .. }
                | CoreError::Positivity { .. }
                | CoreError::SignPrecondition { .. }
                | CoreError::FitBudget { .. }
        )
    }
}
