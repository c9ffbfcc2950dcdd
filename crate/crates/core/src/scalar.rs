//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the analytic and sampling code is generic over.
///
/// Implemented for `f32` and `f64`. Constants are written as `f64` literals and
/// converted with [`Scalar::c`], which is exact for every literal used here.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn c(value: f64) -> Self {
        Self::from_f64(value).expect("f64 constant representable in scalar type")
    }

    /// Converts a count into `Self`.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossless widening to `f64`, used at the I/O boundary.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `10^exponent`, exact whenever the power of ten is representable.
    #[inline]
    fn pow10(exponent: i32) -> Self {
        let ten = Self::c(10.0);
        if exponent >= 0 {
            ten.powi(exponent)
        } else {
            Self::one() / ten.powi(-exponent)
        }
    }

    /// Tolerance used for closed-interval comparisons in band-mantissa units.
    #[inline]
    fn edge_tolerance() -> Self {
        Self::epsilon() * Self::c(64.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
