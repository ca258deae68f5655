//! The rigid supporting contour under the skin and its piecewise-planar
//! sampling used for contact.

use nalgebra::Vector3;

use super::bspline::{clamped_uniform_knots, BSplineSurface};
use crate::error::{Error, Result};
use crate::geometry::HeightField;

/// Plane of one support element: a point on it and its upward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPlane {
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    /// Set when the query lay outside the sampled area and the nearest
    /// boundary element was used instead.
    pub clamped: bool,
}

impl ElementPlane {
    /// Signed distance of `p` along the normal; negative below the plane.
    #[inline]
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(&(p - self.point))
    }
}

/// Z_sup: the smooth contour lowered by `offset`, with a cache sampled at the
/// mesh spacing. Each cache cell is split along its (1,0)-(0,1) diagonal into
/// two triangles, each a flat contact element.
#[derive(Debug, Clone)]
pub struct SupportContour {
    surface: BSplineSurface,
    offset: f64,
    sampled: HeightField,
    /// Per cell: lower-left then upper-right triangle.
    triangles: Vec<Triangle>,
    origin: (f64, f64),
    inv_spacing: (f64, f64),
    cells: (usize, usize),
    max_slope: f64,
}

#[derive(Debug, Clone, Copy)]
struct Triangle {
    normal: Vector3<f64>,
    vertex: Vector3<f64>,
}

impl SupportContour {
    /// Samples `surface - offset` on the lattice `anchor + k * spacing`
    /// restricted to the surface domain.
    pub fn from_surface(surface: BSplineSurface, offset: f64, anchor: (f64, f64), spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::Validation("support sampling spacing must be positive".into()));
        }
        if !(offset >= 0.0 && offset.is_finite()) {
            return Err(Error::Validation(format!("support offset must be >= 0, got {offset}")));
        }
        let (dx0, dx1, dy0, dy1) = surface.domain();
        let lattice = |lo: f64, hi: f64, a: f64| {
            let k0 = ((lo - a) / spacing - 1e-9).ceil() as i64;
            let k1 = ((hi - a) / spacing + 1e-9).floor() as i64;
            (k0, (k1 - k0 + 1).max(0) as usize)
        };
        let (kx, nx) = lattice(dx0, dx1, anchor.0);
        let (ky, ny) = lattice(dy0, dy1, anchor.1);
        let origin = (anchor.0 + kx as f64 * spacing, anchor.1 + ky as f64 * spacing);
        let sampled = HeightField::from_fn(nx, ny, (spacing, spacing), origin, |x, y| {
            surface.evaluate_clamped(x, y) - offset
        })?;
        if sampled.nx() < 2 || sampled.ny() < 2 {
            return Err(Error::Validation("support domain is smaller than one mesh cell".into()));
        }
        let triangles = triangles(&sampled);
        let max_slope = triangles
            .iter()
            .map(|t| t.normal.xy().norm() / t.normal.z)
            .fold(0.0, f64::max);
        Ok(Self {
            max_slope,
            surface,
            offset,
            origin: sampled.origin(),
            inv_spacing: (1.0 / sampled.dx(), 1.0 / sampled.dy()),
            cells: (sampled.nx() - 1, sampled.ny() - 1),
            sampled,
            triangles,
        })
    }

    /// Support plane `z = c + a x + b y` over `[x0, x1] x [y0, y1]`.
    pub fn plane(a: f64, b: f64, c: f64, extent: (f64, f64, f64, f64), spacing: f64) -> Result<Self> {
        let (x0, x1, y0, y1) = extent;
        let surface = BSplineSurface::from_greville(
            3,
            clamped_uniform_knots(4, 3, x0, x1),
            clamped_uniform_knots(4, 3, y0, y1),
            |x, y| c + a * x + b * y,
        )?;
        Self::from_surface(surface, 0.0, (x0, y0), spacing)
    }

    /// The smooth contour before lowering.
    pub fn smooth_surface(&self) -> &BSplineSurface {
        &self.surface
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn sampled(&self) -> &HeightField {
        &self.sampled
    }

    /// Z_sup on the spline itself.
    pub fn height(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.surface.evaluate(x, y)? - self.offset)
    }

    #[inline]
    fn locate(&self, x: f64, y: f64) -> (&Triangle, bool) {
        let u = (x - self.origin.0) * self.inv_spacing.0;
        let v = (y - self.origin.1) * self.inv_spacing.1;
        let (ncx, ncy) = self.cells;
        let (i, fu, cu) = cell_coordinate(u, ncx);
        let (j, fv, cv) = cell_coordinate(v, ncy);
        let half = usize::from(fu + fv > 1.0);
        (&self.triangles[(j * ncx + i) * 2 + half], cu || cv)
    }

    /// The contact element under `(x, y)`.
    #[inline]
    pub fn element_plane(&self, x: f64, y: f64) -> ElementPlane {
        let (t, clamped) = self.locate(x, y);
        ElementPlane {
            point: t.vertex,
            normal: t.normal,
            clamped,
        }
    }

    /// Signed normal clearance of `p` above its contact element.
    #[inline]
    pub fn clearance(&self, p: &Vector3<f64>) -> f64 {
        self.element_plane(p.x, p.y).signed_distance(p)
    }

    /// Lipschitz constant of [`Self::element_height`] inside the sampled
    /// area.
    pub fn max_slope(&self) -> f64 {
        self.max_slope
    }

    /// Height of the piecewise-planar support directly under `(x, y)`.
    pub fn element_height(&self, x: f64, y: f64) -> f64 {
        let e = self.element_plane(x, y);
        e.point.z - (e.normal.x * (x - e.point.x) + e.normal.y * (y - e.point.y)) / e.normal.z
    }
}

/// Cell index, fractional position and out-of-range flag of a lattice
/// coordinate, clamped to the `n` cells.
#[inline]
fn cell_coordinate(u: f64, n: usize) -> (usize, f64, bool) {
    if u >= 0.0 {
        let k = u as usize;
        if k < n {
            (k, u - k as f64, false)
        } else {
            let exact = u == n as f64;
            (n - 1, 1.0, !exact)
        }
    } else {
        (0, 0.0, true)
    }
}

fn triangles(s: &HeightField) -> Vec<Triangle> {
    let z = s.z();
    let mut out = Vec::with_capacity(2 * (s.nx() - 1) * (s.ny() - 1));
    for j in 0..s.ny() - 1 {
        for i in 0..s.nx() - 1 {
            let p = |a: usize, b: usize| Vector3::new(s.x(a), s.y(b), z[s.index(a, b)]);
            let (p00, p10, p01, p11) = (p(i, j), p(i + 1, j), p(i, j + 1), p(i + 1, j + 1));
            let lower = (p10 - p00).cross(&(p01 - p00)).normalize();
            let upper = (p01 - p11).cross(&(p10 - p11)).normalize();
            out.push(Triangle {
                normal: lower,
                vertex: p00,
            });
            out.push(Triangle {
                normal: upper,
                vertex: p11,
            });
        }
    }
    out
}

/// Lowers the smooth contour by the largest amount it sits above the skin,
/// so that the support touches the deepest wrinkle and nowhere rises above
/// the skin.
pub fn build_support_contour(zs: &BSplineSurface, zc: &HeightField, mesh_spacing: f64) -> Result<SupportContour> {
    let mut offset: f64 = 0.0;
    for (_, _, x, y, z) in zc.valid_nodes() {
        offset = offset.max(zs.evaluate(x, y)? - z);
    }
    SupportContour::from_surface(zs.clone(), offset, zc.origin(), mesh_spacing)
}
