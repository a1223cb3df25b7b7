//! Floating-point abstraction shared by every numerical module.

use std::iter::Sum;

use ndarray::NdFloat;
use num_traits::FromPrimitive;

/// Real scalar used throughout the crate. Implemented for `f32` and `f64`.
pub trait Scalar: NdFloat + FromPrimitive + Default + Sum {
    /// Lossless for f64, rounding for f32.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
