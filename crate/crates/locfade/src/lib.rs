//! Time-of-arrival localization and distributed detection under Nakagami-m fading.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: adaptive quadrature and special functions,
//! - [`channel`]: fading envelope/phase models and seeded sampling,
//! - [`toa`]: measurement densities (conditional and marginal) and samplers,
//! - [`bounds`]: Fisher information and Cramer-Rao style lower bounds,
//! - [`estimate`]: grid-plus-refinement location estimators and MSE evaluation,
//! - [`detect`]: per-anchor Neyman-Pearson detectors and threshold calibration,
//! - [`fusion`]: K-out-of-M binary decision fusion,
//! - [`simkit`]: scenario definitions and reproduction experiments,
//! - [`cli`]: config parsing and CSV/SVG emission for the `locfade` binary.

// Quadrature tables and pinned reference values keep every digit of their
// full-precision form, even where fewer digits would round-trip.
#![allow(clippy::excessive_precision)]

pub mod error;
pub mod numerics;
pub mod channel;
pub mod toa;
pub mod bounds;
pub mod estimate;
pub mod detect;
pub mod fusion;
pub mod simkit;
pub mod cli;

pub use error::{Error, Result};

/// Position in meters. One-dimensional setups use only the x coordinate.
pub type Point = [f64; 2];

/// Euclidean distance between two positions, restricted to the first
/// `dimension` coordinates (1 for a line, 2 for a plane).
pub fn distance(a: Point, b: Point, dimension: usize) -> f64 {
    let dx = a[0] - b[0];
    if dimension == 1 {
        dx.abs()
    } else {
        let dy = a[1] - b[1];
        (dx * dx + dy * dy).sqrt()
    }
}

pub(crate) fn check_dimension(dimension: usize) -> Result<()> {
    if dimension == 1 || dimension == 2 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "dimension must be 1 or 2, got {dimension}"
        )))
    }
}
