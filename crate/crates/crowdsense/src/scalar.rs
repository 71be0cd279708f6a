//! Floating-point abstraction for quality and score arithmetic.
//!
//! All of the vote-weighting math is scalar-type-agnostic; the engine and the
//! shared primitives are generic over [`Scalar`] so that the same code runs in
//! `f32` or `f64`. The crate root exports `f64` aliases for the common case.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type used for quality estimates, confidence scores and thresholds.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + fmt::Debug + fmt::Display + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Exact conversion of a bookkeeping count into the working scalar.
pub(crate) fn count<F: Scalar>(n: u64) -> F {
    F::from_u64(n).expect("count representable as scalar")
}

pub(crate) fn half<F: Scalar>() -> F {
    F::from_f64(0.5).expect("0.5 representable as scalar")
}

pub(crate) fn two<F: Scalar>() -> F {
    F::one() + F::one()
}
