//! Scalar abstraction shared by the geometric modules.
//!
//! Everything that is pure math is written against [`Real`] so it can run in
//! `f32` (e.g. inside a training loop) or `f64` (evaluation and 3D work).

use nalgebra::RealField;

/// Floating point scalar: `f32` or `f64`.
pub trait Real: RealField + Copy + num_traits::ToPrimitive {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Lossy conversion back to `f64` (for reporting and statistics).
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
