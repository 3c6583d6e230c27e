//! Computed-hologram engine built around sparse wavelet-domain superposition.
//!
//! The expensive part of point-cloud hologram synthesis is adding one large
//! spherical-wave footprint per scene point. This crate instead transforms
//! each depth slice's point-spread function once, keeps only its strongest
//! wavelet coefficients, and superposes those per point with integer index
//! shifts. One inverse transform per tile then yields the complex field.
//! A conventional lookup-table engine ([`direct`]) and a literal per-pixel
//! evaluator serve as baselines and accuracy oracles, [`encode`] turns fields
//! into printable binary holograms, and [`io`] covers the on-disk formats.
//!
//! All numeric code is generic over the scalar through the [`Real`] trait;
//! `f64` is the default type parameter everywhere and the tolerances quoted
//! in the test suite assume it. `f32` works for memory-bound experiments.

pub mod config;
pub mod direct;
pub mod encode;
pub mod error;
pub mod field;
pub mod io;
pub mod psf;
pub mod wasabi;
pub mod wavelet;

use num_traits::{Float, FloatConst, NumAssign};
use rustfft::FftNum;

/// Scalar type the engine is generic over. Implemented by `f32` and `f64`.
pub trait Real: Float + FloatConst + NumAssign + FftNum {}
impl<T> Real for T where T: Float + FloatConst + NumAssign + FftNum {}

/// Shorthand used throughout: convert an `f64` constant into the working scalar.
pub(crate) fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant representable in scalar type")
}

pub use config::{OpticalConfig, PointCloud, PointSource, TileIndex};
pub use error::CghError;
pub use field::{BitField, ComplexField, RealField};
pub use psf::{PsfSpec, WasabiLut};
pub use wavelet::{SparseCoeffs, WaveletFilter, WaveletPyramid};

/// Concrete aliases for the default double-precision pipeline.
pub type ComplexField64 = field::ComplexField<f64>;
pub type RealField64 = field::RealField<f64>;
pub type OpticalConfig64 = config::OpticalConfig<f64>;
