//! Scalar abstraction shared by every numerical routine in the crate.

use ndarray::NdFloat;
use num_traits::{FloatConst, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the solvers are generic over: `f32` or `f64`.
pub trait Real: NdFloat + FloatConst + FromPrimitive + Default + Serialize + DeserializeOwned {
    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
