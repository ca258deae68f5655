//! Forehead-wrinkle stretching simulation: smooth-contour extraction from a
//! wrinkled height field, an explicit tension-only particle membrane pulled
//! over the resulting support, stress evaluation and residual-wrinkle
//! metrics.

pub mod error;
pub mod geometry;
pub mod mesh;
pub mod render;
pub mod solver;
pub mod stress;
pub mod surface;
pub mod sweep;
pub mod wrinkles;

pub use error::{Error, Result};
