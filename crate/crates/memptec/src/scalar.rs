//! Scalar abstraction for the numeric core: f32 or f64.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the feature matrices, models and attacks run on.
///
/// Serde bounds are left to the containers so the derives stay unambiguous;
/// both implementors serialize natively.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Lift an `f64` constant into the scalar type.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("finite constant")
    }

    /// Lift an integer count into the scalar type.
    fn from_count(v: u64) -> Self {
        // Counts above 2^53 do not occur in package metadata.
        Self::from_u64(v).unwrap_or_else(Self::zero)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
