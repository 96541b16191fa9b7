//! Scalar abstraction for the numeric kernel.
//!
//! The jet algebra, expression evaluator and grid functions are generic over
//! `Real` so the same code runs in f32 or f64; the solver pipeline
//! instantiates f64.

use num_traits::{Float, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};

/// Floating scalar used throughout the numeric kernel.
pub trait Real:
    Float + FromPrimitive + NumAssign + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics only for non-representable values,
    /// which cannot happen for f32/f64.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("literal not representable in scalar type")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("count not representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `i!` as a scalar. Exact for `i <= 20` in f64 (20! < 2^63).
pub fn factorial<T: Real>(i: usize) -> T {
    let mut acc = T::one();
    for j in 2..=i {
        acc *= T::of_usize(j);
    }
    acc
}
