//! Numerical laboratory for directional trace formulas of commuting Toeplitz
//! operators on toric models.
//!
//! The joint spectrum of the models is explicit, so the smoothed spectral
//! projector and the Fourier transform of the trace reduce to certified
//! lattice sums. These are compared with closed-form leading-order
//! predictions built from the moment-map geometry.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod model;
pub mod quadrature;
pub mod special;

pub use error::{LabError, Result};
pub use model::{MomentPolytope, PointM, SpectralPoint, ToricModel};
