//! Floating-point scalar abstraction.
//!
//! All signal-domain math is generic over [`Scalar`] so the same code runs in
//! single or double precision. The command-line front end instantiates `f64`.

use std::fmt::Display;
use std::iter::Sum;

/// Sample type the analysis runs on: `f32` or `f64`.
pub trait Scalar: num_traits::Float + rustfft::FftNum + Sum + Display {
    /// Cast an `f64` constant into the working precision.
    fn of(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }

    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(v: f64) -> Self {
        v
    }

    fn to_f64_lossy(self) -> f64 {
        self
    }
}
