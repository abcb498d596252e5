//! Pixel scalar abstraction.
//!
//! Images store pixels as `f32` or `f64`. Every windowed accumulation widens
//! to `f64` regardless of the storage type, so the generic kernels behave the
//! same for both; only the final store rounds back to `T`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// floating point pixel type: f32 or f64
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Widen to `f64`.
    #[inline]
    fn wide(self) -> f64 {
        // Float -> f64 never fails for f32/f64.
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Narrow from `f64`, rounding to the nearest representable value.
    #[inline]
    fn narrow(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
