//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, NumAssign};

/// Floating point types the transforms, layers and training loop run on.
///
/// Implemented for `f32` and `f64`. The reference path is `f64`; `f32` is
/// available behind the training precision switch with looser tolerances.
pub trait Scalar:
    Float + FloatConst + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Bytes used by one value in the serialized model payload.
    const BYTES: usize;

    /// Lossy conversion from `f64`; constants in generic code go through here.
    fn of(x: f64) -> Self;

    /// Widening conversion used by serialization and reporting.
    fn widen(self) -> f64;

    /// Absolute tolerance for "is this imaginary part zero" checks.
    fn spectrum_tolerance() -> Self;
}

impl Scalar for f32 {
    const BYTES: usize = 4;

    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn widen(self) -> f64 {
        self as f64
    }

    fn spectrum_tolerance() -> Self {
        1e-4
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;

    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn widen(self) -> f64 {
        self
    }

    fn spectrum_tolerance() -> Self {
        1e-9
    }
}

/// Numeric precision selectable at run time (CLI, training config).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    Single,
    #[default]
    Double,
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "32" | "f32" | "single" => Ok(Precision::Single),
            "64" | "f64" | "double" => Ok(Precision::Double),
            other => Err(format!("unknown precision `{other}` (expected 32 or 64)")),
        }
    }
}
