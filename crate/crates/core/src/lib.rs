//! Numerical laboratory for frequency-uniform decompositions, Gabor frames and
//! non-elliptic Schrödinger flows.
//!
//! The spectral core (`fields`, `freqdecomp`, `gabor`, `propagator`,
//! `seminorms`, `solver`) is generic over [`Real`]; the experiment harnesses
//! (`estimates`, `scenarios`) run in `f64`.

pub mod estimates;
pub mod families;
pub mod fields;
pub mod freqdecomp;
pub mod gabor;
pub mod io;
pub mod propagator;
pub mod scenarios;
pub mod seminorms;
pub mod solver;

mod error;
mod sum;

pub use error::{Error, Result};
pub use rustfft::num_complex::Complex;
pub use sum::{NeumaierSum, neumaier_sum};

use std::fmt::{Debug, Display, LowerExp};

/// Scalar type the spectral core is written against.
pub trait Real:
    rustfft::FftNum
    + num_traits::Float
    + num_traits::FloatConst
    + Default
    + Display
    + LowerExp
    + std::iter::Sum
    + Debug
{
    fn lit(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("literal representable")
    }
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite scalar")
    }
    fn of_usize(v: usize) -> Self {
        Self::lit(v as f64)
    }
    fn of_i64(v: i64) -> Self {
        Self::lit(v as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type C64 = Complex<f64>;
pub type C32 = Complex<f32>;

pub type Grid64 = fields::Grid<f64>;
pub type Grid32 = fields::Grid<f32>;
pub type Field64 = fields::ComplexField<f64>;
pub type Field32 = fields::ComplexField<f32>;
pub type SpaceTime64 = fields::SpaceTimeField<f64>;
pub type SpaceTime32 = fields::SpaceTimeField<f32>;
pub type Partition64 = freqdecomp::Partition<f64>;
pub type Coefficients64 = gabor::FrameCoefficients<f64>;
