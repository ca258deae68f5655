//! Residual-wrinkle extraction and the quantified wrinkle parameters.
//!
//! A wrinkle cell is a grid node lying more than a threshold below the
//! smooth fit of its field. Maps are cleaned by a binary opening and by
//! dropping small 8-connected components before measuring.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HeightField;
use crate::mesh::ParticleMesh;
use crate::surface::{control_counts, iterate_smooth_fit, BSplineSurface, SmoothingConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct WrinkleMap {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin: (f64, f64),
    /// Row-major wrinkle membership.
    pub binary: Vec<bool>,
    /// Depth below the fit (mm) on wrinkle cells, zero elsewhere.
    pub depth: Vec<f64>,
    /// 8-connected component of each cell, numbered from 1 in raster order
    /// of first appearance; 0 off the wrinkles.
    pub labels: Vec<u32>,
    /// Area of each component (mm^2), indexed by label - 1.
    pub component_areas: Vec<f64>,
}

impl WrinkleMap {
    /// Builds a map from a membership grid and depths, labelling components.
    pub fn from_parts(
        (nx, ny): (usize, usize),
        (dx, dy): (f64, f64),
        origin: (f64, f64),
        binary: Vec<bool>,
        depth: Vec<f64>,
    ) -> Result<Self> {
        if binary.len() != nx * ny || depth.len() != nx * ny {
            return Err(Error::Validation(format!(
                "wrinkle map buffers do not match a {nx}x{ny} grid"
            )));
        }
        if binary.iter().zip(&depth).any(|(&b, &d)| b != (d > 0.0)) {
            return Err(Error::Validation("wrinkle depth must be positive exactly on wrinkle cells".into()));
        }
        let labels = label_components(&binary, nx, ny);
        let count = labels.iter().copied().max().unwrap_or(0) as usize;
        let mut cells = vec![0usize; count];
        for &l in &labels {
            if l > 0 {
                cells[l as usize - 1] += 1;
            }
        }
        let component_areas = cells.iter().map(|&c| c as f64 * dx * dy).collect();
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            origin,
            binary,
            depth,
            labels,
            component_areas,
        })
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn count(&self) -> usize {
        self.component_areas.len()
    }

    pub fn true_cells(&self) -> usize {
        self.binary.iter().filter(|&&b| b).count()
    }

    /// The depth grid as a height field for export.
    pub fn depth_field(&self) -> Result<HeightField> {
        HeightField::new(self.nx, self.ny, (self.dx, self.dy), self.origin, self.depth.clone())
    }

    fn with_binary(&self, binary: Vec<bool>) -> Result<Self> {
        let depth = binary
            .iter()
            .zip(&self.depth)
            .map(|(&b, &d)| if b { d } else { 0.0 })
            .collect();
        Self::from_parts(
            (self.nx, self.ny),
            (self.dx, self.dy),
            self.origin,
            binary,
            depth,
        )
    }
}

/// Marks every valid node of `zc` lying more than `threshold` below `zf`.
pub fn extract_wrinkles(zc: &HeightField, zf: &BSplineSurface, threshold: f64) -> Result<WrinkleMap> {
    if !(threshold > 0.0) {
        return Err(Error::Validation(format!("extraction threshold must be positive, got {threshold}")));
    }
    let n = zc.nx() * zc.ny();
    let mut binary = vec![false; n];
    let mut depth = vec![0.0; n];
    for (i, j, x, y, z) in zc.valid_nodes() {
        let d = zf.evaluate(x, y)? - z;
        if d > threshold {
            let k = zc.index(i, j);
            binary[k] = true;
            depth[k] = d;
        }
    }
    WrinkleMap::from_parts((zc.nx(), zc.ny()), (zc.dx(), zc.dy()), zc.origin(), binary, depth)
}

/// Union-find labelling of 8-connected true cells.
pub fn label_components(binary: &[bool], nx: usize, ny: usize) -> Vec<u32> {
    let mut parent: Vec<usize> = (0..binary.len()).collect();
    fn find(parent: &mut [usize], mut k: usize) -> usize {
        while parent[k] != k {
            parent[k] = parent[parent[k]];
            k = parent[k];
        }
        k
    }
    let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
    };
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if !binary[k] {
                continue;
            }
            // Already-visited neighbours: west, south-west, south, south-east.
            if i > 0 && binary[k - 1] {
                union(&mut parent, k, k - 1);
            }
            if j > 0 {
                let below = k - nx;
                if binary[below] {
                    union(&mut parent, k, below);
                }
                if i > 0 && binary[below - 1] {
                    union(&mut parent, k, below - 1);
                }
                if i + 1 < nx && binary[below + 1] {
                    union(&mut parent, k, below + 1);
                }
            }
        }
    }
    let mut ids = vec![0u32; binary.len()];
    let mut next = 0;
    let mut labels = vec![0u32; binary.len()];
    for k in 0..binary.len() {
        if binary[k] {
            let r = find(&mut parent, k);
            if ids[r] == 0 {
                next += 1;
                ids[r] = next;
            }
            labels[k] = ids[r];
        }
    }
    labels
}

/// Separable square erosion; cells outside the grid count as false.
pub fn erode(binary: &[bool], nx: usize, ny: usize, radius: usize) -> Vec<bool> {
    square_filter(binary, nx, ny, radius, true)
}

/// Separable square dilation; cells outside the grid count as false.
pub fn dilate(binary: &[bool], nx: usize, ny: usize, radius: usize) -> Vec<bool> {
    square_filter(binary, nx, ny, radius, false)
}

fn square_filter(binary: &[bool], nx: usize, ny: usize, radius: usize, all: bool) -> Vec<bool> {
    let r = radius as isize;
    let pass = |src: &[bool], along_x: bool| -> Vec<bool> {
        let mut out = vec![false; src.len()];
        for j in 0..ny {
            for i in 0..nx {
                let mut acc = all;
                for o in -r..=r {
                    let (ii, jj) = if along_x {
                        (i as isize + o, j as isize)
                    } else {
                        (i as isize, j as isize + o)
                    };
                    let inside = ii >= 0 && jj >= 0 && (ii as usize) < nx && (jj as usize) < ny;
                    let v = inside && src[jj as usize * nx + ii as usize];
                    if all {
                        acc &= v;
                    } else {
                        acc |= v;
                    }
                }
                out[j * nx + i] = acc;
            }
        }
        out
    };
    let rows = pass(binary, true);
    pass(&rows, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WrinkleConfig {
    /// Depth below the fit that marks a wrinkle (mm).
    pub threshold: f64,
    /// Half-width of the square opening element (cells).
    pub open_radius: usize,
    /// Components smaller than this are dropped (mm^2).
    pub min_component_area: f64,
}

impl Default for WrinkleConfig {
    fn default() -> Self {
        Self {
            threshold: 0.15,
            open_radius: 1,
            min_component_area: 1.0,
        }
    }
}

impl WrinkleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::Validation("wrinkle threshold must be positive".into()));
        }
        if !(self.min_component_area >= 0.0) {
            return Err(Error::Validation("minimum component area must be >= 0".into()));
        }
        Ok(())
    }
}

/// Binary opening followed by removal of components smaller than
/// `min_component_area`.
pub fn denoise_morphology(map: &WrinkleMap, open_radius: usize, min_component_area: f64) -> Result<WrinkleMap> {
    let opened = dilate(
        &erode(&map.binary, map.nx, map.ny, open_radius),
        map.nx,
        map.ny,
        open_radius,
    );
    let opened = map.with_binary(opened)?;
    let keep: Vec<bool> = opened.component_areas.iter().map(|&a| a >= min_component_area).collect();
    let cleaned = opened
        .labels
        .iter()
        .map(|&l| l > 0 && keep[l as usize - 1])
        .collect();
    opened.with_binary(cleaned)
}

/// Depth statistics of the unstretched wrinkles that the metrics refer to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrinkleReference {
    pub max_depth: f64,
    pub mean_depth: f64,
}

impl WrinkleReference {
    /// Max and mean depth over the map's wrinkle cells; `None` when empty.
    pub fn of(map: &WrinkleMap) -> Option<Self> {
        let depths: Vec<f64> = map.depth.iter().zip(&map.binary).filter(|(_, &b)| b).map(|(&d, _)| d).collect();
        if depths.is_empty() {
            return None;
        }
        Some(Self {
            max_depth: depths.iter().copied().fold(0.0, f64::max),
            mean_depth: depths.iter().sum::<f64>() / depths.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WrinkleReport {
    pub count: usize,
    /// mm
    pub max_depth: f64,
    /// Mean over wrinkle cells (mm).
    pub mean_depth: f64,
    /// Fraction of the wrinkle area deeper than 60% of the reference
    /// maximum depth.
    pub p60: f64,
    pub p80: f64,
    /// Area deeper than the reference mean depth (mm^2).
    pub a_m: f64,
    /// mm^2
    pub area: f64,
    pub reference_max_depth: f64,
    pub reference_mean_depth: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub const REPORT_CSV_HEADER: &str = "Ld,dfs,count,max_depth,mean_depth,P60,P80,Am,area";

impl WrinkleReport {
    pub fn csv_row(&self, ld: f64, dfs: f64) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{ld},{dfs},{},{},{},{},{},{},{}",
            self.count, self.max_depth, self.mean_depth, self.p60, self.p80, self.a_m, self.area
        );
        s
    }
}

/// Counts and areas of the map measured against `reference`. Passing
/// `None` measures the map against its own depths.
pub fn wrinkle_parameters(map: &WrinkleMap, reference: Option<WrinkleReference>) -> Result<WrinkleReport> {
    let own = WrinkleReference::of(map);
    let Some(stats) = own else {
        let r = reference.unwrap_or(WrinkleReference {
            max_depth: 0.0,
            mean_depth: 0.0,
        });
        return Ok(WrinkleReport {
            reference_max_depth: r.max_depth,
            reference_mean_depth: r.mean_depth,
            ..WrinkleReport::default()
        });
    };
    let r = reference.unwrap_or(stats);
    if !(r.max_depth > 0.0 && r.mean_depth > 0.0) {
        return Err(Error::Validation(
            "reference depths must be positive to measure a nonempty wrinkle map".into(),
        ));
    }
    let cells = map.true_cells();
    let over = |limit: f64| {
        map.depth
            .iter()
            .zip(&map.binary)
            .filter(|(&d, &b)| b && d > limit)
            .count()
    };
    Ok(WrinkleReport {
        count: map.count(),
        max_depth: stats.max_depth,
        mean_depth: stats.mean_depth,
        p60: over(0.6 * r.max_depth) as f64 / cells as f64,
        p80: over(0.8 * r.max_depth) as f64 / cells as f64,
        a_m: over(r.mean_depth) as f64 * map.cell_area(),
        area: cells as f64 * map.cell_area(),
        reference_max_depth: r.max_depth,
        reference_mean_depth: r.mean_depth,
        warnings: Vec::new(),
    })
}

/// Fit, extract and clean the wrinkles of one height field.
pub fn wrinkle_map_of(field: &HeightField, smoothing: &SmoothingConfig, wrinkles: &WrinkleConfig) -> Result<WrinkleMap> {
    wrinkles.validate()?;
    let (nxc, nyc) = control_counts(field, smoothing.control_spacing);
    let fit = iterate_smooth_fit(field, nxc, nyc, smoothing)?;
    let raw = extract_wrinkles(field, &fit.surface, wrinkles.threshold)?;
    denoise_morphology(&raw, wrinkles.open_radius, wrinkles.min_component_area)
}

/// Deformed surface of the membrane sampled on a grid of the given spacing
/// anchored at the mesh origin and clipped to the undeformed patch, so that
/// residual and reference maps cover the same region. Each mesh cell is
/// split into two triangles and interpolated linearly; nodes outside the
/// deformed sheet are masked. Returns the field and the number of inverted
/// triangles.
pub fn rasterize_membrane(mesh: &ParticleMesh, positions: &[nalgebra::Vector3<f64>], spacing: f64) -> Result<(HeightField, usize)> {
    if !(spacing > 0.0) {
        return Err(Error::Validation(format!("raster spacing must be positive, got {spacing}")));
    }
    let (ox, oy) = mesh.origin();
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in positions {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    let (xmin, xmax) = (xmin.max(ox), xmax.min(ox + mesh.width()));
    let (ymin, ymax) = (ymin.max(oy), ymax.min(oy + mesh.height()));
    const SNAP: f64 = 1e-9;
    let k0x = ((xmin - ox) / spacing - SNAP).ceil() as i64;
    let k1x = ((xmax - ox) / spacing + SNAP).floor() as i64;
    let k0y = ((ymin - oy) / spacing - SNAP).ceil() as i64;
    let k1y = ((ymax - oy) / spacing + SNAP).floor() as i64;
    let nx = (k1x - k0x + 1).max(0) as usize;
    let ny = (k1y - k0y + 1).max(0) as usize;
    let gx0 = ox + k0x as f64 * spacing;
    let gy0 = oy + k0y as f64 * spacing;
    let mut z = vec![f64::NAN; nx * ny];
    let mut inverted = 0;
    let (mnx, mny) = (mesh.nx(), mesh.ny());
    for j in 0..mny - 1 {
        for i in 0..mnx - 1 {
            let p = |a: usize, b: usize| positions[b * mnx + a];
            let tris = [
                [p(i, j), p(i + 1, j), p(i, j + 1)],
                [p(i + 1, j + 1), p(i, j + 1), p(i + 1, j)],
            ];
            for t in &tris {
                let area2 = (t[1].x - t[0].x) * (t[2].y - t[0].y) - (t[2].x - t[0].x) * (t[1].y - t[0].y);
                if !(area2 > 0.0) {
                    inverted += 1;
                    continue;
                }
                let lo_x = t.iter().map(|q| q.x).fold(f64::INFINITY, f64::min);
                let hi_x = t.iter().map(|q| q.x).fold(f64::NEG_INFINITY, f64::max);
                let lo_y = t.iter().map(|q| q.y).fold(f64::INFINITY, f64::min);
                let hi_y = t.iter().map(|q| q.y).fold(f64::NEG_INFINITY, f64::max);
                let i0 = (((lo_x - gx0) / spacing - SNAP).ceil().max(0.0)) as usize;
                let i1 = (((hi_x - gx0) / spacing + SNAP).floor()) as i64;
                let j0 = (((lo_y - gy0) / spacing - SNAP).ceil().max(0.0)) as usize;
                let j1 = (((hi_y - gy0) / spacing + SNAP).floor()) as i64;
                if i1 < 0 || j1 < 0 {
                    continue;
                }
                for gj in j0..=(j1 as usize).min(ny.saturating_sub(1)) {
                    for gi in i0..=(i1 as usize).min(nx.saturating_sub(1)) {
                        let (x, y) = (gx0 + gi as f64 * spacing, gy0 + gj as f64 * spacing);
                        let w1 = ((x - t[0].x) * (t[2].y - t[0].y) - (t[2].x - t[0].x) * (y - t[0].y)) / area2;
                        let w2 = ((t[1].x - t[0].x) * (y - t[0].y) - (x - t[0].x) * (t[1].y - t[0].y)) / area2;
                        let w0 = 1.0 - w1 - w2;
                        let tol = -1e-9;
                        if w0 >= tol && w1 >= tol && w2 >= tol {
                            let zz = w0 * t[0].z + w1 * t[1].z + w2 * t[2].z;
                            let cell = &mut z[gj * nx + gi];
                            if !(cell.is_finite() && *cell >= zz) {
                                *cell = zz;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((HeightField::new(nx, ny, (spacing, spacing), (gx0, gy0), z)?, inverted))
}

/// Wrinkles of the membrane at `positions`, measured against `reference`
/// (or against themselves when `None`).
pub fn measure_residual(
    mesh: &ParticleMesh,
    positions: &[nalgebra::Vector3<f64>],
    raster_spacing: f64,
    smoothing: &SmoothingConfig,
    wrinkles: &WrinkleConfig,
    reference: Option<WrinkleReference>,
) -> Result<(WrinkleReport, WrinkleMap)> {
    let (field, inverted) = rasterize_membrane(mesh, positions, raster_spacing)?;
    let map = wrinkle_map_of(&field, smoothing, wrinkles)?;
    let mut report = wrinkle_parameters(&map, reference)?;
    if inverted > 0 {
        report
            .warnings
            .push(format!("{inverted} mesh triangles are folded over in the deformed configuration"));
    }
    Ok((report, map))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(nx: usize, ny: usize, cells: &[(usize, usize, f64)]) -> WrinkleMap {
        let mut b = vec![false; nx * ny];
        let mut d = vec![0.0; nx * ny];
        for &(i, j, v) in cells {
            b[j * nx + i] = true;
            d[j * nx + i] = v;
        }
        WrinkleMap::from_parts((nx, ny), (0.5, 0.5), (0.0, 0.0), b, d).unwrap()
    }

    #[test]
    fn singleton_is_opened_away() {
        let m = map(7, 7, &[(3, 3, 0.4)]);
        let d = denoise_morphology(&m, 1, 0.0).unwrap();
        assert_eq!(d.true_cells(), 0);
        assert_eq!(d.count(), 0);
    }

    #[test]
    fn empty_map_stays_empty() {
        let m = map(5, 5, &[]);
        let d = denoise_morphology(&m, 1, 1.0).unwrap();
        assert_eq!(d.true_cells(), 0);
        let r = wrinkle_parameters(&d, None).unwrap();
        assert_eq!(r, WrinkleReport::default());
    }

    #[test]
    fn diagonal_cells_join() {
        let m = map(4, 4, &[(0, 0, 0.2), (1, 1, 0.2), (3, 0, 0.2)]);
        assert_eq!(m.count(), 2);
        assert_eq!(m.labels[0], 1);
        assert_eq!(m.labels[5], 1);
        assert_eq!(m.labels[3], 2);
    }

    #[test]
    fn uniform_depth_boundaries() {
        let cells: Vec<_> = (0..4).flat_map(|j| (0..4).map(move |i| (i, j, 0.5))).collect();
        let m = map(4, 4, &cells);
        let r = wrinkle_parameters(
            &m,
            Some(WrinkleReference {
                max_depth: 0.5,
                mean_depth: 0.5,
            }),
        )
        .unwrap();
        assert_eq!((r.p60, r.p80, r.a_m), (1.0, 1.0, 0.0));
        assert_eq!(r.area, 16.0 * 0.25);
    }

    #[test]
    fn small_components_are_dropped() {
        let mut cells: Vec<_> = (0..3).flat_map(|j| (0..3).map(move |i| (i, j, 0.3))).collect();
        cells.extend((0..5).flat_map(|j| (5..10).map(move |i| (i, j, 0.3))));
        let m = map(10, 6, &cells);
        // 9 cells = 2.25 mm^2 against 25 cells = 6.25 mm^2.
        let d = denoise_morphology(&m, 1, 3.0).unwrap();
        assert_eq!(d.count(), 1);
        assert_eq!(d.true_cells(), 25);
    }

    #[test]
    fn mismatched_depths_are_rejected() {
        let b = vec![true, false, false, false];
        let d = vec![0.0; 4];
        assert!(WrinkleMap::from_parts((2, 2), (1.0, 1.0), (0.0, 0.0), b, d).is_err());
    }
}
