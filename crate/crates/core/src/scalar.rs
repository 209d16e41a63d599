//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn of(x: f64) -> Self;

    /// Lossy conversion to `f64` for reporting.
    fn as_f64(self) -> f64;

    /// Tolerance floor for checks that are stated at double precision.
    /// Single precision cannot resolve e.g. `1e-12`; the floor lifts such
    /// thresholds to a small multiple of machine epsilon.
    fn tol(requested: f64) -> Self {
        let floor = Self::epsilon() * Self::of(64.0);
        Self::of(requested).max(floor)
    }
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn creal<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// `-i`, the factor in front of every Schrödinger-type generator.
#[inline]
pub(crate) fn minus_i<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), -T::one())
}
