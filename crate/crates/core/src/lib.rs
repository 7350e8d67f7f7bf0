//! Numerical certificates for multivariate operator inequalities.
//!
//! The crate builds one-sided sigmoid envelopes for scalar functions, lifts
//! them to Hermitian operator tuples through polynomial isometry maps with
//! Kantorovich corrections, computes the ratio/difference/W-bound constants by
//! box optimization, and validates every emitted inequality as a Loewner-order
//! certificate (minimum eigenvalue of the slack operator).

pub mod bounds;
pub mod envelope;
pub mod error;
pub mod exec;
pub mod maps;
pub mod spectral;
pub mod tails;
pub mod wbound;

pub use error::{CoreError, Result};
pub use spectral::{
    HermitianOperator, IntervalBox, LoewnerCheck, OperatorTuple, SpectralDecomposition,
    Tolerances,
};
