//! Numeric abstraction shared by the geometry and model code.
//!
//! Everything that does arithmetic on coordinates, areas, or model
//! coefficients is generic over [`Scalar`], which is implemented for `f32`
//! and `f64`. The crate root exposes `f64` aliases for the common case.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type usable by the model.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + rstar::RTreeNum + Debug + Display + Default + Send + Sync + 'static
{
    /// Convert an `f64` literal. Panics only if the literal is not
    /// representable, which cannot happen for `f32`/`f64`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Default convergence tolerance for iterative solvers in this precision.
    fn solver_tolerance() -> Self;
}

impl Scalar for f64 {
    fn solver_tolerance() -> Self {
        1e-8
    }
}

impl Scalar for f32 {
    fn solver_tolerance() -> Self {
        // 1e-8 is below f32 resolution for O(1) coefficients.
        1e-5
    }
}
