//! Free-surface Bénard convection on a flattened slab.
//!
//! The moving fluid domain `{ -1 < y3 < eta(y1, y2, t) }` is pulled back to the
//! fixed slab `Sigma x (-1, 0)` through the map
//! `Phi: (x1, x2, x3) -> (x1, x2, x3 + (1 + x3) eta_bar)`, where `eta_bar` is a
//! harmonic-type extension of the surface function. All differential operators
//! pick up the Jacobian data of `Phi`; this crate builds that geometry, the
//! transformed operators, stationary and time-dependent solvers, the kinematic
//! surface transport, higher-order initial-data construction, and the Picard
//! iteration that couples them, together with the energy and contraction
//! diagnostics used to verify each piece.
//!
//! Horizontal directions are periodic and discretized by Fourier collocation;
//! the vertical direction uses a uniform node grid with second-order finite
//! differences. Core math is generic over the floating-point scalar through
//! [`Scalar`]; `f64` aliases for the main types live at the crate root.

pub mod checkpoint;
pub mod config;
pub mod data_compat;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod fft;
pub mod field;
pub mod forms;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod manufactured;
pub mod norms;
pub mod operators;
pub mod picard;
pub mod rng;
pub mod transport;

pub use error::{Error, Result};
pub use grid::Grid;

use num_traits::{Float, FloatConst, NumAssignOps};

/// Floating-point scalar the numerics are generic over: `f32` or `f64`.
pub trait Scalar: rustfft::FftNum + Float + FloatConst + NumAssignOps {
    /// Converts an `f64` literal/parameter into the working scalar.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal")
    }

    /// Lossless-enough view of the scalar as `f64` (exact for f32/f64).
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Default working precision.
pub type Real = f64;

pub type SurfaceField64 = field::SurfaceField<f64>;
pub type VolumeField64 = field::VolumeField<f64>;
pub type VectorField64 = field::VectorField<f64>;
pub type GeometryPack64 = geometry::GeometryPack<f64>;
pub type SpectralGrid64 = fft::SpectralGrid<f64>;

pub type SurfaceField32 = field::SurfaceField<f32>;
pub type VolumeField32 = field::VolumeField<f32>;
pub type GeometryPack32 = geometry::GeometryPack<f32>;
