//! Floating-point scalar abstraction shared by the numerical kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the statistics, eigensolver and mechanism kernels are
/// generic over. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Relative residual bound an eigendecomposition must satisfy.
    const EIG_RESIDUAL_TOL: f64;
    /// Relative symmetry tolerance accepted by the eigensolver.
    const SYMMETRY_TOL: f64;

    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 is representable")
    }

    fn of_f32(value: f32) -> Self {
        Self::from_f32(value).expect("f32 is representable")
    }

    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("usize is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const EIG_RESIDUAL_TOL: f64 = 1e-8;
    const SYMMETRY_TOL: f64 = 1e-8;
}

impl Scalar for f32 {
    const EIG_RESIDUAL_TOL: f64 = 1e-3;
    const SYMMETRY_TOL: f64 = 1e-4;
}
