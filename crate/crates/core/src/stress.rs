//! Per-link Cauchy stresses of the stretched membrane and the injury check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HeightField;
use crate::mesh::{Axis, ParticleMesh, PA_TO_N_PER_MM2};
use crate::solver::SolverState;

/// Stress grid of one link direction (Pa), row-major, with the element
/// centres in the undeformed configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisStress {
    pub nx: usize,
    pub ny: usize,
    /// Centre of element (0, 0) (mm).
    pub origin: (f64, f64),
    pub spacing: f64,
    pub values: Vec<f64>,
    pub max: f64,
    /// Grid index of the maximum.
    pub argmax: (usize, usize),
}

impl AxisStress {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + i as f64 * self.spacing,
            self.origin.1 + j as f64 * self.spacing,
        )
    }

    pub fn argmax_location(&self) -> (f64, f64) {
        self.center(self.argmax.0, self.argmax.1)
    }

    /// The grid as a height field for export.
    pub fn to_field(&self) -> Result<HeightField> {
        HeightField::new(
            self.nx,
            self.ny,
            (self.spacing, self.spacing),
            self.origin,
            self.values.clone(),
        )
    }

    fn from_values(nx: usize, ny: usize, origin: (f64, f64), spacing: f64, values: Vec<f64>) -> Self {
        let mut max = 0.0;
        let mut argmax = (0, 0);
        for (k, &v) in values.iter().enumerate() {
            if v > max {
                max = v;
                argmax = (k % nx, k / nx);
            }
        }
        Self {
            nx,
            ny,
            origin,
            spacing,
            values,
            max,
            argmax,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressField {
    /// `(nx - 1) x ny` grid of x-link stresses.
    pub sigma_x: AxisStress,
    /// `nx x (ny - 1)` grid of y-link stresses.
    pub sigma_y: AxisStress,
}

/// `E * max(dU, 0) / U0` (Pa).
#[inline]
pub fn link_stress(youngs_modulus: f64, rest_length: f64, length: f64) -> f64 {
    youngs_modulus * (length - rest_length).max(0.0) / rest_length
}

/// Stress carried by a link force over its cross-section (N, mm^2 -> Pa).
#[inline]
pub fn stress_from_force(force: f64, area: f64) -> f64 {
    force / area / PA_TO_N_PER_MM2
}

pub fn element_stresses(mesh: &ParticleMesh, state: &SolverState) -> StressField {
    let (nx, ny) = (mesh.nx(), mesh.ny());
    let h = mesh.spacing();
    let (x0, y0) = mesh.origin();
    let e = mesh.material().youngs_modulus;
    let mut sx = vec![0.0; (nx - 1) * ny];
    let mut sy = vec![0.0; nx * (ny - 1)];
    for link in mesh.links() {
        let len = (state.positions[link.b] - state.positions[link.a]).norm();
        let sigma = link_stress(e, link.rest_length, len);
        let (i, j) = (link.a % nx, link.a / nx);
        match link.axis {
            Axis::X => sx[j * (nx - 1) + i] = sigma,
            Axis::Y => sy[j * nx + i] = sigma,
        }
    }
    StressField {
        sigma_x: AxisStress::from_values(nx - 1, ny, (x0 + 0.5 * h, y0), h, sx),
        sigma_y: AxisStress::from_values(nx, ny - 1, (x0, y0 + 0.5 * h), h, sy),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjuryThresholds {
    /// Pa
    pub sigma_x_max: f64,
    /// Pa
    pub sigma_y_max: f64,
}

impl Default for InjuryThresholds {
    fn default() -> Self {
        Self {
            sigma_x_max: 2.5e5,
            sigma_y_max: 5.0e5,
        }
    }
}

impl InjuryThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_x_max > 0.0 && self.sigma_y_max > 0.0) {
            return Err(Error::Validation("injury thresholds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffendingElement {
    pub axis: Axis,
    pub index: (usize, usize),
    pub center: (f64, f64),
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InjuryAssessment {
    pub overstretched_x: bool,
    pub overstretched_y: bool,
    pub offending: Vec<OffendingElement>,
}

impl InjuryAssessment {
    pub fn injured(&self) -> bool {
        self.overstretched_x || self.overstretched_y
    }
}

/// Flags every element whose stress is strictly above its axis threshold.
pub fn classify_injury(field: &StressField, thresholds: &InjuryThresholds) -> InjuryAssessment {
    let mut out = InjuryAssessment::default();
    for (grid, axis, limit) in [
        (&field.sigma_x, Axis::X, thresholds.sigma_x_max),
        (&field.sigma_y, Axis::Y, thresholds.sigma_y_max),
    ] {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let sigma = grid.get(i, j);
                if sigma > limit {
                    out.offending.push(OffendingElement {
                        axis,
                        index: (i, j),
                        center: grid.center(i, j),
                        sigma,
                    });
                }
            }
        }
    }
    out.overstretched_x = out.offending.iter().any(|o| o.axis == Axis::X);
    out.overstretched_y = out.offending.iter().any(|o| o.axis == Axis::Y);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{apply_boundary_conditions, discretize, LoadProgram, Material};
    use crate::solver::{ConvergenceConfig, Integration};

    fn setup() -> (ParticleMesh, SolverState) {
        let field = HeightField::from_fn(6, 5, (1.0, 1.0), (0.0, 0.0), |_, _| 0.0).unwrap();
        let mesh = discretize(&field, 1.0, &Material::default()).unwrap();
        let program = LoadProgram {
            dfs: 0.5,
            ..LoadProgram::default()
        };
        let mesh = apply_boundary_conditions(&mesh, &program).unwrap();
        let integration = Integration::for_mesh(&mesh, &ConvergenceConfig::default()).unwrap();
        let state = SolverState::new(&mesh, &program, integration, 1.0);
        (mesh, state)
    }

    #[test]
    fn unloaded_is_stress_free() {
        let (mesh, state) = setup();
        let f = element_stresses(&mesh, &state);
        assert_eq!((f.sigma_x.nx, f.sigma_x.ny), (5, 5));
        assert_eq!((f.sigma_y.nx, f.sigma_y.ny), (6, 4));
        assert!(f.sigma_x.values.iter().chain(&f.sigma_y.values).all(|&s| s == 0.0));
        assert!(!classify_injury(&f, &InjuryThresholds::default()).injured());
    }

    #[test]
    fn uniform_ten_percent_stretch() {
        let (mesh, mut state) = setup();
        for p in state.positions.iter_mut() {
            p.y *= 1.1;
        }
        let f = element_stresses(&mesh, &state);
        for &s in &f.sigma_y.values {
            assert!((s - 5e4).abs() <= 5e4 * 1e-12);
        }
        assert!(f.sigma_x.values.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn compression_reads_zero() {
        let (mesh, mut state) = setup();
        for p in state.positions.iter_mut() {
            p.x *= 0.9;
        }
        let f = element_stresses(&mesh, &state);
        assert!(f.sigma_x.values.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn threshold_is_strict() {
        let (mesh, state) = setup();
        let mut f = element_stresses(&mesh, &state);
        f.sigma_x.values[3] = 2.5e5;
        let a = classify_injury(&f, &InjuryThresholds::default());
        assert!(!a.overstretched_x);
        f.sigma_y.values[7] = 5.1e5;
        let a = classify_injury(&f, &InjuryThresholds::default());
        assert!(a.overstretched_y && !a.overstretched_x);
        assert_eq!(a.offending.len(), 1);
        assert_eq!(a.offending[0].index, (1, 1));
        assert_eq!(a.offending[0].sigma, 5.1e5);
    }
}
