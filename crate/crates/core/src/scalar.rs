//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// Tolerances quoted throughout the crate are calibrated for `f64`; the
/// `f32` instantiation is supported for the arithmetic but the verification
/// thresholds will not hold at single precision.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Gamma function, evaluated through the platform `libm`.
    fn gamma(self) -> Self;
}

impl Scalar for f64 {
    fn gamma(self) -> Self {
        libm::tgamma(self)
    }
}

impl Scalar for f32 {
    fn gamma(self) -> Self {
        libm::tgammaf(self)
    }
}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("f64 literal representable in scalar type")
}

/// Converts a count into the working scalar.
#[inline]
pub fn idx<T: Scalar>(v: usize) -> T {
    T::from_usize(v).expect("index representable in scalar type")
}

/// Rising factorial (a)_k.
pub fn pochhammer<T: Scalar>(a: T, k: usize) -> T {
    (0..k).fold(T::one(), |acc, i| acc * (a + idx(i)))
}

/// k! as a scalar.
pub fn factorial<T: Scalar>(k: usize) -> T {
    (1..=k).fold(T::one(), |acc, i| acc * idx(i))
}
