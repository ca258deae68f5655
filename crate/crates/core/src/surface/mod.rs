//! Smooth-contour extraction: fit a penalized spline to the wrinkled field,
//! drop the samples that sit in wrinkles, refit the rest into the smooth
//! forehead contour and lower it until it supports the skin from below.

mod bspline;
mod fit;
mod support;

pub use bspline::{clamped_uniform_knots, greville, BSplineSurface, MAX_DEGREE};
pub use fit::{
    build_smooth_contour, control_counts, fit_penalized_spline, iterate_smooth_fit, remove_wrinkled_points,
    SmoothFit, FIT_DEGREE,
};
pub use support::{build_support_contour, ElementPlane, SupportContour};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    /// Weight of the curvature penalty, dimensionless.
    pub lambda: f64,
    /// Samples further than this from the fit are treated as wrinkled (mm).
    pub wrinkle_threshold: f64,
    pub max_iterations: usize,
    /// RMS change between iterates that counts as converged (mm).
    pub convergence_tol: f64,
    /// Target distance between knots (mm).
    pub control_spacing: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            wrinkle_threshold: 0.15,
            max_iterations: 10,
            convergence_tol: 1e-3,
            control_spacing: 2.0,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Validation(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.wrinkle_threshold > 0.0) {
            return Err(Error::Validation("wrinkle threshold must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Validation("max_iterations must be at least 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Validation("convergence tolerance must be positive".into()));
        }
        if !(self.control_spacing > 0.0) {
            return Err(Error::Validation("control spacing must be positive".into()));
        }
        Ok(())
    }
}
