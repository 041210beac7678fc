//! Scalar abstraction for the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar the transform and channel kernels are generic over.
///
/// `f64` is the working type of the full pipeline (see the aliases at the
/// crate root); `f32` is available for callers that trade precision for
/// footprint.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless conversion from `usize` for index-derived quantities
    /// (`usize` values in this crate stay far below the 2^24 / 2^53
    /// mantissa limits).
    fn from_index(value: usize) -> Self {
        Self::from_usize(value).expect("index representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
