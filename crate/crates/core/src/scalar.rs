//! Numeric traits the library is generic over.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num::bigint::BigInt;
use num::rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, Signed, ToPrimitive, Zero};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar used for lengths, measures and field values.
pub trait Real:
    Float
    + NumAssign
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal; panics only for values the type cannot hold.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal out of range")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Value type for boundary data and the stopping-time decomposition.
///
/// Implemented for the float types and for `BigRational`, so decompositions can
/// be replayed in exact arithmetic.
pub trait Coefficient: Clone + PartialOrd + Signed + Debug + Send + Sync {
    fn from_count(n: u64) -> Self;
    fn from_f64_lossy(x: f64) -> Self;
    fn to_f64_lossy(&self) -> f64;
}

impl Coefficient for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }
    fn from_f64_lossy(x: f64) -> Self {
        x
    }
    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Coefficient for f32 {
    fn from_count(n: u64) -> Self {
        n as f32
    }
    fn from_f64_lossy(x: f64) -> Self {
        x as f32
    }
    fn to_f64_lossy(&self) -> f64 {
        *self as f64
    }
}

impl Coefficient for BigRational {
    fn from_count(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    /// Exact binary expansion of the float; non-finite input maps to zero.
    fn from_f64_lossy(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(BigRational::zero)
    }
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}
