use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, NumCast, ToPrimitive};

/// Floating-point scalar the numeric core is generic over.
///
/// `f32` and `f64` both implement it; the models in this crate run at `f64`
/// (see the aliases at the crate root) so finite-difference checks stay
/// near machine precision.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Convert from `f64`, rounding if the target is narrower.
    fn of(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("finite f64 converts to any Scalar")
    }

    /// Widen to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
