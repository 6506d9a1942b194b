//! Design-based variance bounds for randomized experiments.
//!
//! The least-favorable joint distribution of potential outcomes is found by
//! solving a binary program over imputed outcomes; the resulting imputed
//! table drives a causal bootstrap over the known assignment mechanism.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod copula_ip;
pub mod data;
pub mod designs;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod inference;
pub mod pipeline;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Exact rational scalar.
pub type Rational = num_rational::BigRational;

/// Reduced program in double precision.
pub type Program = copula_ip::BinaryProgram<f64>;

/// Reduced program in exact rational arithmetic.
pub type ExactProgram = copula_ip::BinaryProgram<Rational>;

/// Treatment moments in double precision.
pub type Moments = designs::TreatmentMoments<f64>;

/// Treatment moments in exact rational arithmetic.
pub type ExactMoments = designs::TreatmentMoments<Rational>;
