//! Scalar abstraction shared by every kernel in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar usable by the sparse kernels, factorizations,
/// Krylov drivers and the simulated runtime.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant, saturating to the nearest representable
    /// value.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    /// Converts to `f64` for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Explicit constant `v`, floored at the smallest positive normal value so
    /// that guards stay meaningful in narrower formats.
    fn guard(v: f64) -> Self {
        Self::of(v).max(Self::min_positive_value())
    }

    /// Size in bytes of one value on the wire.
    fn wire_bytes() -> usize {
        std::mem::size_of::<Self>()
    }
}

impl Scalar for f64 {}
impl Scalar for f32 {}
