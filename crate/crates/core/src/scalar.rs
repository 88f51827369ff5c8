//! Scalar abstraction: the simulation and network math are written once,
//! generic over the floating-point type.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable throughout the crate (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + std::fmt::Display + std::fmt::Debug + std::iter::Sum + Send + Sync + 'static
{
    /// Lift an `f64` literal into this scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    fn two() -> Self {
        Self::of(2.0)
    }

    fn half() -> Self {
        Self::of(0.5)
    }
}

impl Real for f32 {}
impl Real for f64 {}
