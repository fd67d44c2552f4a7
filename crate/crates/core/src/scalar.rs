//! Scalar abstractions.
//!
//! Numeric kernels (estimators, losses, log-gamma wrappers) are written against
//! [`Real`], which covers `f32` and `f64`. Inequality checkers only need an
//! ordered field and are written against [`Field`], which additionally admits
//! exact rationals such as [`num_rational::BigRational`].

use std::fmt::Debug;

use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

/// An ordered field with lossless-enough conversion from `f64`.
pub trait Field: Num + Signed + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug {
    /// Converts a literal. Panics only for non-finite input.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(|| panic!("non-finite literal {v}"))
    }

    fn from_count(v: u64) -> Self {
        Self::from_u64(v).expect("integer conversion")
    }

    /// Width of the band treated as an equality boundary when classifying limits.
    fn boundary_tol() -> Self;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl Field for f64 {
    fn boundary_tol() -> Self {
        1e-12
    }
}

impl Field for f32 {
    fn boundary_tol() -> Self {
        1e-6
    }
}

impl Field for BigRational {
    fn boundary_tol() -> Self {
        BigRational::from_integer(0.into())
    }
}

/// Floating-point scalar used by the estimators and losses.
pub trait Real: Field + Float + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}
