//! Floating-point scalar abstraction shared by the numeric modules.
//!
//! The normalization, increment, quantization and information-theory code is
//! written once against [`Real`] and instantiated for `f32` and `f64`. The
//! crate root exports `f64` aliases for the common types.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar usable by every numeric stage of the pipeline.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or intermediate.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }

    /// Complementary error function, evaluated in double precision.
    fn complementary_erf(self) -> Self {
        Self::of(libm::erfc(self.as_f64()))
    }

    /// Round half away from zero, the only rounding rule used in this crate.
    #[inline]
    fn round_half_away(self) -> Self {
        // `Float::round` is specified as half-away-from-zero.
        self.round()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Pairwise (cascade) summation with a fixed split order.
///
/// The result is bitwise reproducible for a given input order and its error
/// grows as O(log n) rather than O(n).
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const LEAF: usize = 8;
    if values.len() <= LEAF {
        return values.iter().fold(T::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum over a strided view (used for column sums of row-major data).
pub(crate) fn pairwise_sum_by<T: Real>(len: usize, at: &impl Fn(usize) -> T) -> T {
    fn go<T: Real>(lo: usize, hi: usize, at: &impl Fn(usize) -> T) -> T {
        if hi - lo <= 8 {
            return (lo..hi).fold(T::zero(), |acc, i| acc + at(i));
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, at) + go(mid, hi, at)
    }
    go(0, len, at)
}
