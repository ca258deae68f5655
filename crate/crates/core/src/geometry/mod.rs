//! Regular-grid height fields: the wrinkled skin surface, its wrinkle-free
//! subset (via the validity mask) and the various derived grids.
//!
//! All lengths are millimetres.

mod io;
mod resample;
mod synth;

pub use io::{load_height_field, save_height_field, FieldFormat};
pub use resample::resample_to_grid;
pub use synth::{generate_synthetic_forehead, Groove, SyntheticForeheadSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest grid accepted in either direction; a clamped cubic spline needs
/// four samples per axis.
pub const MIN_GRID_NODES: usize = 4;

/// Heights sampled on a uniform `nx` by `ny` grid.
///
/// Storage is row-major with row `j` at `y = y0 + j * dy`. Cells with no
/// sample carry `mask == false`; their `z` entry is NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    x0: f64,
    y0: f64,
    z: Vec<f64>,
    mask: Vec<bool>,
}

impl HeightField {
    /// Builds a field from row-major heights. Non-finite heights become
    /// masked cells.
    pub fn new(
        nx: usize,
        ny: usize,
        spacing: (f64, f64),
        origin: (f64, f64),
        z: Vec<f64>,
    ) -> Result<Self> {
        let mask = z.iter().map(|v| v.is_finite()).collect();
        Self::with_mask(nx, ny, spacing, origin, z, mask)
    }

    pub fn with_mask(
        nx: usize,
        ny: usize,
        (dx, dy): (f64, f64),
        (x0, y0): (f64, f64),
        mut z: Vec<f64>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        if nx < MIN_GRID_NODES || ny < MIN_GRID_NODES {
            return Err(Error::Validation(format!(
                "grid is {nx}x{ny}; at least {MIN_GRID_NODES} nodes per axis are required"
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::Validation(format!(
                "grid spacing must be positive, got dx={dx}, dy={dy}"
            )));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::Validation("grid origin must be finite".into()));
        }
        if z.len() != nx * ny || mask.len() != nx * ny {
            return Err(Error::Validation(format!(
                "expected {} samples, got {} heights and {} mask entries",
                nx * ny,
                z.len(),
                mask.len()
            )));
        }
        for (k, (v, &m)) in z.iter_mut().zip(&mask).enumerate() {
            if m && !v.is_finite() {
                return Err(Error::Validation(format!(
                    "non-finite height {v} at node ({}, {})",
                    k % nx,
                    k / nx
                )));
            }
            if !m {
                *v = f64::NAN;
            }
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            x0,
            y0,
            z,
            mask,
        })
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(
        nx: usize,
        ny: usize,
        spacing: (f64, f64),
        origin: (f64, f64),
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut z = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                z.push(f(origin.0 + i as f64 * spacing.0, origin.1 + j as f64 * spacing.1));
            }
        }
        Self::new(nx, ny, spacing, origin, z)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.x0, self.y0)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    /// `(xmin, xmax, ymin, ymax)` of the node lattice.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (self.x0, self.x(self.nx - 1), self.y0, self.y(self.ny - 1))
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Height at node `(i, j)`, `None` when masked.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = self.index(i, j);
        self.mask[k].then(|| self.z[k])
    }

    #[inline]
    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.mask[self.index(i, j)]
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_fully_valid(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Iterates `(i, j, x, y, z)` over valid nodes in storage order.
    pub fn valid_nodes(&self) -> impl Iterator<Item = (usize, usize, f64, f64, f64)> + '_ {
        (0..self.ny).flat_map(move |j| {
            (0..self.nx).filter_map(move |i| self.get(i, j).map(|z| (i, j, self.x(i), self.y(j), z)))
        })
    }

    /// Copy of this field with a new mask; cells already masked stay masked.
    pub fn with_cleared(&self, clear: impl Fn(usize, usize) -> bool) -> Self {
        let mut out = self.clone();
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = self.index(i, j);
                if out.mask[k] && clear(i, j) {
                    out.mask[k] = false;
                    out.z[k] = f64::NAN;
                }
            }
        }
        out
    }

    /// Min and max over valid heights, `None` if nothing is valid.
    pub fn z_range(&self) -> Option<(f64, f64)> {
        self.valid_nodes().fold(None, |acc, (_, _, _, _, z)| match acc {
            None => Some((z, z)),
            Some((lo, hi)) => Some((lo.min(z), hi.max(z))),
        })
    }

    /// Bilinear interpolation at `(x, y)`. Returns `None` outside the grid or
    /// when any of the four surrounding nodes is masked.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let u = (x - self.x0) / self.dx;
        let v = (y - self.y0) / self.dy;
        let eps = 1e-9;
        if u < -eps || v < -eps || u > (self.nx - 1) as f64 + eps || v > (self.ny - 1) as f64 + eps {
            return None;
        }
        let i = (u.floor().max(0.0) as usize).min(self.nx - 2);
        let j = (v.floor().max(0.0) as usize).min(self.ny - 2);
        let fu = (u - i as f64).clamp(0.0, 1.0);
        let fv = (v - j as f64).clamp(0.0, 1.0);
        let z00 = self.get(i, j)?;
        let z10 = self.get(i + 1, j)?;
        let z01 = self.get(i, j + 1)?;
        let z11 = self.get(i + 1, j + 1)?;
        Some(
            z00 * (1.0 - fu) * (1.0 - fv)
                + z10 * fu * (1.0 - fv)
                + z01 * (1.0 - fu) * fv
                + z11 * fu * fv,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_grids_and_bad_spacing() {
        assert!(HeightField::new(3, 4, (1.0, 1.0), (0.0, 0.0), vec![0.0; 12]).is_err());
        assert!(HeightField::new(4, 4, (0.0, 1.0), (0.0, 0.0), vec![0.0; 16]).is_err());
        assert!(HeightField::new(4, 4, (1.0, 1.0), (0.0, 0.0), vec![0.0; 15]).is_err());
    }

    #[test]
    fn nan_becomes_masked() {
        let mut z = vec![1.0; 16];
        z[5] = f64::NAN;
        let f = HeightField::new(4, 4, (1.0, 1.0), (0.0, 0.0), z).unwrap();
        assert_eq!(f.valid_count(), 15);
        assert_eq!(f.get(1, 1), None);
        assert_eq!(f.get(2, 1), Some(1.0));
    }

    #[test]
    fn masked_infinite_is_fine_but_valid_infinite_is_not() {
        let mut z = vec![1.0; 16];
        z[0] = f64::INFINITY;
        let mut mask = vec![true; 16];
        assert!(HeightField::with_mask(4, 4, (1.0, 1.0), (0.0, 0.0), z.clone(), mask.clone()).is_err());
        mask[0] = false;
        assert!(HeightField::with_mask(4, 4, (1.0, 1.0), (0.0, 0.0), z, mask).is_ok());
    }

    #[test]
    fn bilinear_reproduces_planes() {
        let f = HeightField::from_fn(5, 6, (0.5, 0.25), (1.0, -1.0), |x, y| 2.0 * x - y + 0.5).unwrap();
        for &(x, y) in &[(1.0, -1.0), (1.3, -0.6), (3.0, 0.25), (2.77, 0.1)] {
            let z = f.sample_bilinear(x, y).unwrap();
            assert!((z - (2.0 * x - y + 0.5)).abs() < 1e-12);
        }
        assert!(f.sample_bilinear(0.9, 0.0).is_none());
    }
}
