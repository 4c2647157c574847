//! Finite-dimensional stratified (Carnot) groups in exponential coordinates.
//!
//! The crate builds graded nilpotent Lie algebras with exact rational
//! structure constants, compiles the truncated product series into a group
//! law over a chosen scalar type, and layers homogeneous gauges, sampleable
//! measures, hypoelliptic heat-kernel simulation and a deterministic
//! experiment harness on top.
//!
//! Exact arithmetic (`Rational`) is used wherever the objects are algebraic:
//! structure constants, product coefficients, validation. Floating point
//! (`f64` by default) is used for sampling and metric estimation. Both go
//! through the same generic code paths, so any discrepancy between the two
//! is attributable to rounding alone.

pub mod algebra;
pub mod group;
pub mod harness;
pub mod heat;
pub mod io;
mod linalg;
pub mod measure;
pub mod metric;
pub mod rng;
pub mod scalar;
pub mod stats;

/// Exact scalar for structure constants and coefficient validation.
pub type Rational = num_rational::BigRational;

/// Default floating-point group law.
pub type Law = group::GroupLaw<f64>;
/// Default floating-point group element.
pub type Element = group::GroupElement<f64>;
/// Exact-arithmetic group law.
pub type ExactLaw = group::GroupLaw<Rational>;
/// Exact-arithmetic group element.
pub type ExactElement = group::GroupElement<Rational>;
