use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Real-valued pixel scalar: `f32` or `f64`.
///
/// Every real-valued computation in the crate (rescale, histogram binning,
/// window statistics, the VOI transform) is written against this trait.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion used for parameters given as `f64`.
    fn of(v: f64) -> Self {
        <Self as NumCast>::from(v).unwrap_or_else(Self::nan)
    }

    fn of_usize(v: usize) -> Self {
        <Self as NumCast>::from(v).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
