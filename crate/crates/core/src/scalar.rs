//! Scalar abstractions shared by the numeric modules.
//!
//! Two families are used: [`Real`] for floating-point training and solver
//! math (f32/f64), and [`Exact`] for field arithmetic that must also work
//! on arbitrary-precision rationals (transition composition, stationary
//! distributions).

use std::fmt::{Debug, Display};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, Num, NumAssign, Signed, ToPrimitive};

/// Floating-point scalar usable by the network and the value-iteration solver.
pub trait Real:
    Float
    + NumAssign
    + Signed
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Ordered field scalar: exact for rationals, approximate for floats.
pub trait Exact: Num + Signed + Clone + PartialOrd + Debug + FromPrimitive {}

impl<T> Exact for T where T: Num + Signed + Clone + PartialOrd + Debug + FromPrimitive {}
