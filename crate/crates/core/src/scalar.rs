//! Scalar abstraction for the numeric core.
//!
//! Everything numerical in this crate is generic over [`Real`], which is any
//! IEEE float with the conversions and ops we rely on. In practice that means
//! `f32` and `f64`; the crate root exports concrete aliases for both so
//! downstream code can pick a precision without spelling out type parameters.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar usable throughout the cell, training, and analysis
/// code. A blanket set of supertraits covers arithmetic, transcendental
/// functions (`tanh`, `exp`, ...), conversions, and threading.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, for literals and configuration values.
    fn cast(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to scalar")
    }

    /// Widening conversion used when reporting metrics.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    fn magnitude<S: Real>(x: &[S]) -> S {
        x.iter().map(|&v| v * v).sum::<S>().sqrt()
    }

    #[test]
    fn generic_code_runs_at_both_precisions() {
        let a32 = [1.0f32, 2.0, 2.0];
        let a64 = [1.0f64, 2.0, 2.0];
        assert_eq!(magnitude(&a32), 3.0f32);
        assert_eq!(magnitude(&a64), 3.0f64);
    }

    #[test]
    fn cast_round_trips_representable_values() {
        assert_eq!(f64::cast(0.05).as_f64(), 0.05);
        assert_eq!(f32::cast(0.5), 0.5f32);
    }
}
