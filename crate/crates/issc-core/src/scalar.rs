//! Real scalar abstraction and unit conversions.
//!
//! The numeric core is generic over the scalar type; `f64` is what the CLI
//! and the `*F64` aliases at the crate root use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar type the library is generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 value not representable by scalar type")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

/// dBm to linear milliwatts: `mW = 10^(dBm/10)`.
pub fn dbm_to_mw<T: Scalar>(dbm: T) -> T {
    T::of(10.0).powf(dbm / T::of(10.0))
}

/// Linear milliwatts to dBm.
pub fn mw_to_dbm<T: Scalar>(mw: T) -> T {
    T::of(10.0) * mw.log10()
}

pub fn deg_to_rad<T: Scalar>(deg: T) -> T {
    deg * T::of(std::f64::consts::PI / 180.0)
}

pub fn rad_to_deg<T: Scalar>(rad: T) -> T {
    rad * T::of(180.0 / std::f64::consts::PI)
}
