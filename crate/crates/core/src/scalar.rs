//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar: `f32` or `f64`.
///
/// The tolerance hooks give each precision a sensible default for
/// membership and Gram–Schmidt drop tests. For `f64` these are the
/// unit-scale `1e-10` thresholds used throughout the toolkit.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Absolute tolerance for subspace membership and basis construction.
    fn membership_tol() -> Self;

    /// Converts an `f64` literal; panics only if the value is not representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    fn membership_tol() -> Self {
        1e-4
    }
}

impl Real for f64 {
    fn membership_tol() -> Self {
        1e-10
    }
}

/// `max(1, |x|)`, the denominator for relative deviations.
#[inline]
pub fn rel_scale<T: Real>(x: T) -> T {
    x.abs().max(T::one())
}
