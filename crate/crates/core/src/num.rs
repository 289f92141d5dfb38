//! Scalar abstraction used throughout the crate.
//!
//! All of the vehicle models and solvers are written against [`Real`], so the
//! same code runs in `f64` (the default everywhere) or `f32`. Concrete type
//! aliases live at the crate root.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the library is generic over.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive {}

/// Converts an `f64` literal into the working scalar type.
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant not representable by scalar type")
}
