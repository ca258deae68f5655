use super::{HeightField, MIN_GRID_NODES};
use crate::error::{Error, Result};

/// Bins scattered `(x, y, z)` samples onto a grid anchored at the minimum
/// corner of their bounding box. Each sample goes to its nearest node; a
/// node's height is the mean of its samples, and nodes without samples are
/// masked.
pub fn resample_to_grid(points: &[[f64; 3]], dx: f64, dy: f64) -> Result<HeightField> {
    if points.len() < 16 {
        return Err(Error::Validation(format!(
            "resampling needs at least 16 points, got {}",
            points.len()
        )));
    }
    if !(dx > 0.0 && dy > 0.0) {
        return Err(Error::Validation("resampling spacing must be positive".into()));
    }
    if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(Error::Validation("scattered points must be finite".into()));
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        xmin = xmin.min(p[0]);
        xmax = xmax.max(p[0]);
        ymin = ymin.min(p[1]);
        ymax = ymax.max(p[1]);
    }
    if xmax <= xmin {
        return Err(Error::DegenerateExtent("all points share one x coordinate".into()));
    }
    if ymax <= ymin {
        return Err(Error::DegenerateExtent("all points share one y coordinate".into()));
    }
    let nx = ((xmax - xmin) / dx).round() as usize + 1;
    let ny = ((ymax - ymin) / dy).round() as usize + 1;
    if nx < MIN_GRID_NODES || ny < MIN_GRID_NODES {
        return Err(Error::Validation(format!(
            "bounding box spans only {nx}x{ny} nodes at this spacing; need {MIN_GRID_NODES} per axis"
        )));
    }
    let mut sum = vec![0.0; nx * ny];
    let mut count = vec![0u32; nx * ny];
    for p in points {
        let i = (((p[0] - xmin) / dx).round() as usize).min(nx - 1);
        let j = (((p[1] - ymin) / dy).round() as usize).min(ny - 1);
        sum[j * nx + i] += p[2];
        count[j * nx + i] += 1;
    }
    let z = sum
        .iter()
        .zip(&count)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect();
    HeightField::new(nx, ny, (dx, dy), (xmin, ymin), z)
}
