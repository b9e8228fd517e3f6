//! Floating-point abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the utility model is computed in.
///
/// Implemented for `f32` and `f64`. The special functions that `num-traits`
/// does not cover (log-gamma, complementary error function) are routed to
/// `libm`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    fn ln_gamma(self) -> Self;

    fn erfc(self) -> Self;

    /// Convergence threshold for the incomplete-beta continued fraction.
    fn cf_tolerance() -> Self;

    /// Converts a literal; every `f64` literal used in the crate is representable.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    #[inline]
    fn ln_gamma(self) -> Self {
        libm::lgamma_r(self).0
    }

    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }

    #[inline]
    fn cf_tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    #[inline]
    fn ln_gamma(self) -> Self {
        libm::lgammaf_r(self).0
    }

    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }

    #[inline]
    fn cf_tolerance() -> Self {
        // 1e-12 is below f32 resolution.
        4.0 * f32::EPSILON
    }
}
