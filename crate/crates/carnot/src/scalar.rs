//! Scalar abstraction shared by the exact and floating-point group arithmetic.
//!
//! Structure constants and BCDH coefficients are exact rationals. The group
//! law is evaluated either exactly (`Rational`) or in floating point
//! (`f64`/`f32`); `Scalar::from_rational` is the single conversion point.

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// Coefficient field for coordinates of group elements.
pub trait Scalar:
    Clone
    + PartialEq
    + Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Send
    + Sync
    + 'static
{
    fn from_rational(r: &BigRational) -> Self;

    fn from_int(v: i64) -> Self;

    /// λ^k for layer weights, k ≥ 0.
    fn pow_layer(&self, k: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = acc * self.clone();
        }
        acc
    }

    /// Guard for element constructors; exact scalars are always finite.
    fn is_finite_scalar(&self) -> bool {
        true
    }
}

impl Scalar for f64 {
    fn from_rational(r: &BigRational) -> Self {
        r.to_f64().expect("rational outside f64 range")
    }
    fn from_int(v: i64) -> Self {
        v as f64
    }
    fn is_finite_scalar(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f32 {
    fn from_rational(r: &BigRational) -> Self {
        r.to_f32().expect("rational outside f32 range")
    }
    fn from_int(v: i64) -> Self {
        v as f32
    }
    fn is_finite_scalar(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for BigRational {
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn from_int(v: i64) -> Self {
        BigRational::from_integer(v.into())
    }
}

/// Floating-point scalars, for gauge/metric evaluation (roots and powers).
pub trait RealScalar: Scalar + num_traits::Float {}

impl RealScalar for f64 {}
impl RealScalar for f32 {}
