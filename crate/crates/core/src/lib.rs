//! Near-field propagation toolkit for extremely large antenna arrays.
//!
//! The crate covers the whole chain from array geometry to system-level
//! experiments:
//!
//! * [`geometry`]: array layouts, wavelength bookkeeping and near/far-field
//!   boundaries (Rayleigh, Fresnel, uniform-power distance).
//! * [`channel`]: spherical and planar steering vectors, LoS MIMO matrices and
//!   spatially non-stationary multipath channels.
//! * [`codebook`]: Fourier and polar-domain dictionaries plus on-grid OMP.
//! * [`beamfocus`]: MRT beamfocusing, gain maps, beam-split with phase-only
//!   weights and true-time-delay correction.
//! * [`dof`]: effective spatial degrees of freedom of LoS MIMO links.
//! * [`positioning`]: ToA localization Monte Carlo with CEP statistics.
//! * [`cli`]: declarative experiment configs, CSV output and the self-check.

// `!(x > 0.0)` also rejects NaN, which is the point of those checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod beamfocus;
pub mod channel;
pub mod cli;
pub mod codebook;
pub mod dof;
pub mod error;
pub mod geometry;
pub mod positioning;

pub use error::{NfError, Result};
pub use nalgebra;
pub use num_complex::Complex64;

/// A point or direction in 3D space (meters).
pub type Point3 = nalgebra::Vector3<f64>;
/// A point in the horizontal plane (meters).
pub type Point2 = nalgebra::Vector2<f64>;
