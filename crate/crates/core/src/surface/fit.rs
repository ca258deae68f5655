//! Penalized least-squares fitting of B-spline surfaces to height fields.

use nalgebra::{DMatrix, DVector};

use super::bspline::{basis_funs, clamped_uniform_knots, find_span, penalty_rows_for, BSplineSurface, BasisBuf};
use super::SmoothingConfig;
use crate::error::{Error, Result};
use crate::geometry::HeightField;

/// Degree used for every fitted surface.
pub const FIT_DEGREE: usize = 3;

/// Relative pivot below which the normal matrix is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-13;

/// Control-point counts giving roughly `spacing` mm between knots over the
/// field extent, limited to the number of samples per axis.
pub fn control_counts(field: &HeightField, spacing: f64) -> (usize, usize) {
    let (x0, x1, y0, y1) = field.extent();
    let count = |extent: f64, samples: usize| {
        let spans = ((extent / spacing).round() as usize).max(1);
        (spans + FIT_DEGREE).min(samples).max(FIT_DEGREE + 1)
    };
    (count(x1 - x0, field.nx()), count(y1 - y0, field.ny()))
}

/// Precomputed basis values at the field's columns and rows together with
/// the factorized normal equations. Reused across smoothing iterations.
pub(crate) struct PenalizedFitter<'a> {
    field: &'a HeightField,
    knots_x: Vec<f64>,
    knots_y: Vec<f64>,
    nx_ctrl: usize,
    cols: Vec<(usize, BasisBuf)>,
    rows: Vec<(usize, BasisBuf)>,
    factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl<'a> PenalizedFitter<'a> {
    pub(crate) fn new(field: &'a HeightField, knots_x: Vec<f64>, knots_y: Vec<f64>, lambda: f64) -> Result<Self> {
        let p = FIT_DEGREE;
        let nx_ctrl = knots_x.len() - p - 1;
        let ny_ctrl = knots_y.len() - p - 1;
        let n = nx_ctrl * ny_ctrl;

        let probe = BSplineSurface::new(p, knots_x.clone(), knots_y.clone(), vec![0.0; n])?;
        let (x0, x1, y0, y1) = field.extent();
        if !probe.contains(x0, y0) || !probe.contains(x1, y1) {
            return Err(Error::Fit("knot domain does not cover the field".into()));
        }
        let cols: Vec<_> = (0..field.nx())
            .map(|i| {
                let x = field.x(i).clamp(knots_x[p], knots_x[nx_ctrl]);
                let s = find_span(&knots_x, nx_ctrl, p, x);
                (s, basis_funs(&knots_x, s, p, x))
            })
            .collect();
        let rows: Vec<_> = (0..field.ny())
            .map(|j| {
                let y = field.y(j).clamp(knots_y[p], knots_y[ny_ctrl]);
                let s = find_span(&knots_y, ny_ctrl, p, y);
                (s, basis_funs(&knots_y, s, p, y))
            })
            .collect();

        let mut ata = DMatrix::<f64>::zeros(n, n);
        let mut covered = vec![false; n];
        let mut idx = [0usize; (FIT_DEGREE + 1) * (FIT_DEGREE + 1)];
        let mut w = [0.0f64; (FIT_DEGREE + 1) * (FIT_DEGREE + 1)];
        for j in 0..field.ny() {
            let (sy, by) = &rows[j];
            for i in 0..field.nx() {
                if !field.is_valid(i, j) {
                    continue;
                }
                let (sx, bx) = &cols[i];
                let mut m = 0;
                for b in 0..=p {
                    for a in 0..=p {
                        idx[m] = (sy - p + b) * nx_ctrl + (sx - p + a);
                        w[m] = bx[a] * by[b];
                        m += 1;
                    }
                }
                for k in 0..m {
                    if w[k] != 0.0 {
                        covered[idx[k]] = true;
                    }
                    for l in 0..m {
                        ata[(idx[k], idx[l])] += w[k] * w[l];
                    }
                }
            }
        }

        if lambda == 0.0 {
            if let Some(k) = covered.iter().position(|&c| !c) {
                let (ix, iy) = (k % nx_ctrl, k / nx_ctrl);
                return Err(Error::Fit(format!(
                    "basis function ({ix}, {iy}) has no valid samples in its support \
                     x in [{:.4}, {:.4}], y in [{:.4}, {:.4}]; a positive smoothing weight is required",
                    knots_x[ix],
                    knots_x[ix + p + 1],
                    knots_y[iy],
                    knots_y[iy + p + 1]
                )));
            }
        } else if lambda > 0.0 {
            // Samples per control cell, so that the trade-off does not depend
            // on the data resolution.
            let kx = (knots_x[nx_ctrl] - knots_x[p]) / (nx_ctrl - p) as f64;
            let ky = (knots_y[ny_ctrl] - knots_y[p]) / (ny_ctrl - p) as f64;
            let density = kx * ky / field.cell_area();
            let weight = lambda * density;
            for row in penalty_rows_for(&knots_x, &knots_y, nx_ctrl, ny_ctrl, p) {
                for &(a, ca) in &row {
                    for &(b, cb) in &row {
                        ata[(a, b)] += weight * ca * cb;
                    }
                }
            }
        } else {
            return Err(Error::Validation(format!("smoothing weight must be >= 0, got {lambda}")));
        }

        let max_diag = (0..n).map(|k| ata[(k, k)]).fold(0.0, f64::max);
        let factor = ata
            .cholesky()
            .ok_or_else(|| Error::Fit("normal equations are not positive definite (rank-deficient data)".into()))?;
        let l = factor.l_dirty();
        let min_pivot = (0..n).map(|k| l[(k, k)] * l[(k, k)]).fold(f64::INFINITY, f64::min);
        if !(min_pivot > PIVOT_TOLERANCE * max_diag) {
            return Err(Error::Fit(format!(
                "normal equations are numerically singular (pivot ratio {:.3e})",
                min_pivot / max_diag
            )));
        }

        Ok(Self {
            field,
            knots_x,
            knots_y,
            nx_ctrl,
            cols,
            rows,
            factor,
        })
    }

    /// Solves for control values given heights at the valid samples (in
    /// `valid_nodes` order).
    pub(crate) fn solve(&self, targets: &[f64]) -> Result<BSplineSurface> {
        let p = FIT_DEGREE;
        let n = self.factor.l_dirty().nrows();
        let mut atz = DVector::<f64>::zeros(n);
        let mut t = targets.iter();
        for j in 0..self.field.ny() {
            let (sy, by) = &self.rows[j];
            for i in 0..self.field.nx() {
                if !self.field.is_valid(i, j) {
                    continue;
                }
                let z = *t.next().expect("one target per valid sample");
                let (sx, bx) = &self.cols[i];
                for b in 0..=p {
                    for a in 0..=p {
                        atz[(sy - p + b) * self.nx_ctrl + (sx - p + a)] += bx[a] * by[b] * z;
                    }
                }
            }
        }
        let c = self.factor.solve(&atz);
        BSplineSurface::new(p, self.knots_x.clone(), self.knots_y.clone(), c.as_slice().to_vec())
    }

    /// Surface values at the valid samples, in `valid_nodes` order.
    pub(crate) fn at_samples(&self, s: &BSplineSurface) -> Vec<f64> {
        let p = FIT_DEGREE;
        let coeffs = s.coeffs();
        let mut out = Vec::with_capacity(self.field.valid_count());
        for j in 0..self.field.ny() {
            let (sy, by) = &self.rows[j];
            for i in 0..self.field.nx() {
                if !self.field.is_valid(i, j) {
                    continue;
                }
                let (sx, bx) = &self.cols[i];
                let mut z = 0.0;
                for b in 0..=p {
                    let row = (sy - p + b) * self.nx_ctrl + (sx - p);
                    for a in 0..=p {
                        z += bx[a] * by[b] * coeffs[row + a];
                    }
                }
                out.push(z);
            }
        }
        out
    }
}

fn field_knots(field: &HeightField, nx_ctrl: usize, ny_ctrl: usize, extend: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = FIT_DEGREE;
    if nx_ctrl <= p || ny_ctrl <= p {
        return Err(Error::Validation(format!(
            "need at least {} control points per axis, got {nx_ctrl}x{ny_ctrl}",
            p + 1
        )));
    }
    if nx_ctrl > field.nx() || ny_ctrl > field.ny() {
        return Err(Error::Validation(format!(
            "control grid {nx_ctrl}x{ny_ctrl} exceeds the {}x{} samples",
            field.nx(),
            field.ny()
        )));
    }
    let (x0, x1, y0, y1) = field.extent();
    if !extend {
        return Ok((
            clamped_uniform_knots(nx_ctrl, p, x0, x1),
            clamped_uniform_knots(ny_ctrl, p, y0, y1),
        ));
    }
    let kx = (x1 - x0) / (nx_ctrl - p) as f64;
    let ky = (y1 - y0) / (ny_ctrl - p) as f64;
    let pe = p as f64;
    Ok((
        clamped_uniform_knots(nx_ctrl + 2 * p, p, x0 - pe * kx, x1 + pe * kx),
        clamped_uniform_knots(ny_ctrl + 2 * p, p, y0 - pe * ky, y1 + pe * ky),
    ))
}

fn valid_heights(field: &HeightField) -> Vec<f64> {
    field.valid_nodes().map(|(_, _, _, _, z)| z).collect()
}

/// Exact minimizer of `||N C - Z||^2 + lambda ||B C||^2` over the valid
/// samples, with knots spanning the field.
pub fn fit_penalized_spline(
    field: &HeightField,
    nx_ctrl: usize,
    ny_ctrl: usize,
    config: &SmoothingConfig,
) -> Result<BSplineSurface> {
    config.validate()?;
    let (kx, ky) = field_knots(field, nx_ctrl, ny_ctrl, false)?;
    let fitter = PenalizedFitter::new(field, kx, ky, config.lambda)?;
    fitter.solve(&valid_heights(field))
}

#[derive(Debug, Clone)]
pub struct SmoothFit {
    pub surface: BSplineSurface,
    pub iterations: usize,
    /// RMS change between consecutive iterates, one entry per iteration.
    pub rms_trace: Vec<f64>,
}

/// Repeats the penalized fit, each time fitting the previous fitted values,
/// until the RMS change drops below `convergence_tol` or the iteration
/// budget runs out.
pub fn iterate_smooth_fit(
    field: &HeightField,
    nx_ctrl: usize,
    ny_ctrl: usize,
    config: &SmoothingConfig,
) -> Result<SmoothFit> {
    config.validate()?;
    let (kx, ky) = field_knots(field, nx_ctrl, ny_ctrl, false)?;
    let fitter = PenalizedFitter::new(field, kx, ky, config.lambda)?;
    let mut previous = valid_heights(field);
    let count = previous.len().max(1) as f64;
    let mut trace = Vec::new();
    let mut rising = 0;
    loop {
        let surface = fitter.solve(&previous)?;
        let current = fitter.at_samples(&surface);
        let rms = (current
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / count)
            .sqrt();
        if let Some(&last) = trace.last() {
            rising = if rms > last { rising + 1 } else { 0 };
        }
        trace.push(rms);
        if rising >= 3 {
            return Err(Error::NonConvergence {
                message: "RMS change grew for three consecutive smoothing iterations".into(),
                trace,
            });
        }
        if rms < config.convergence_tol || trace.len() >= config.max_iterations {
            return Ok(SmoothFit {
                surface,
                iterations: trace.len(),
                rms_trace: trace,
            });
        }
        previous = current;
    }
}

/// Masks every sample further than `threshold` from the fitted surface.
pub fn remove_wrinkled_points(zc: &HeightField, zf: &BSplineSurface, threshold: f64) -> Result<HeightField> {
    if !(threshold > 0.0) {
        return Err(Error::Validation(format!("wrinkle threshold must be positive, got {threshold}")));
    }
    let mut residual = vec![0.0; zc.nx() * zc.ny()];
    for (i, j, x, y, z) in zc.valid_nodes() {
        residual[zc.index(i, j)] = (z - zf.evaluate(x, y)?).abs();
    }
    let zd = zc.with_cleared(|i, j| residual[zc.index(i, j)] > threshold);
    if zd.valid_count() == 0 {
        return Err(Error::EmptySurface(format!(
            "no sample lies within {threshold} mm of the fitted surface"
        )));
    }
    Ok(zd)
}

/// Penalized fit over the surviving samples on a knot domain widened by
/// `degree` spans on each side. The curvature penalty carries the surface
/// across masked regions and beyond the patch edge.
pub fn build_smooth_contour(
    zd: &HeightField,
    nx_ctrl: usize,
    ny_ctrl: usize,
    config: &SmoothingConfig,
) -> Result<BSplineSurface> {
    config.validate()?;
    if config.lambda == 0.0 {
        return Err(Error::Fit(
            "the smooth contour needs a positive smoothing weight to bridge masked and extended regions".into(),
        ));
    }
    let (kx, ky) = field_knots(zd, nx_ctrl, ny_ctrl, true)?;
    let fitter = PenalizedFitter::new(zd, kx, ky, config.lambda)?;
    fitter.solve(&valid_heights(zd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_synthetic_forehead, SyntheticForeheadSpec};

    fn cfg(lambda: f64) -> SmoothingConfig {
        SmoothingConfig {
            lambda,
            ..SmoothingConfig::default()
        }
    }

    fn plane_field() -> HeightField {
        HeightField::from_fn(41, 31, (0.25, 0.25), (1.0, 2.0), |x, y| 2.0 * x + 3.0 * y + 1.0).unwrap()
    }

    #[test]
    fn plane_is_reproduced_without_smoothing() {
        let f = plane_field();
        let s = fit_penalized_spline(&f, 8, 6, &cfg(0.0)).unwrap();
        for (_, _, x, y, z) in f.valid_nodes() {
            assert!((s.evaluate(x, y).unwrap() - z).abs() <= 1e-8);
        }
    }

    #[test]
    fn constant_is_invariant_under_smoothing() {
        let f = HeightField::from_fn(30, 20, (0.5, 0.5), (0.0, 0.0), |_, _| 5.0).unwrap();
        for lambda in [0.0, 0.1, 1.0, 100.0] {
            let s = fit_penalized_spline(&f, 7, 5, &cfg(lambda)).unwrap();
            for (_, _, x, y, _) in f.valid_nodes() {
                assert!((s.evaluate(x, y).unwrap() - 5.0).abs() < 1e-9, "lambda {lambda}");
            }
        }
    }

    #[test]
    fn empty_basis_support_is_named() {
        let f = plane_field().with_cleared(|i, _| i >= 30);
        match fit_penalized_spline(&f, 12, 6, &cfg(0.0)) {
            Err(Error::Fit(msg)) => assert!(msg.contains("basis function"), "{msg}"),
            other => panic!("expected fit error, got {other:?}"),
        }
        // The smoothing term bridges the hole.
        assert!(fit_penalized_spline(&f, 12, 6, &cfg(1.0)).is_ok());
    }

    #[test]
    fn plane_is_a_fixed_point_of_iteration() {
        let f = plane_field();
        let fit = iterate_smooth_fit(&f, 8, 6, &cfg(1.0)).unwrap();
        assert_eq!(fit.iterations, 1);
        let single = fit_penalized_spline(&f, 8, 6, &cfg(1.0)).unwrap();
        assert_eq!(fit.surface, single);
    }

    #[test]
    fn single_iteration_equals_single_fit() {
        let spec = SyntheticForeheadSpec::default();
        let f = generate_synthetic_forehead(&spec, 81, 61).unwrap();
        let c = SmoothingConfig {
            max_iterations: 1,
            ..cfg(1.0)
        };
        let it = iterate_smooth_fit(&f, 23, 18, &c).unwrap();
        assert_eq!(it.iterations, 1);
        assert_eq!(it.surface, fit_penalized_spline(&f, 23, 18, &c).unwrap());
    }

    #[test]
    fn iteration_trace_has_monotone_tail() {
        let spec = SyntheticForeheadSpec::default();
        let f = generate_synthetic_forehead(&spec, 161, 121).unwrap();
        let c = SmoothingConfig {
            convergence_tol: 1e-9,
            ..cfg(1.0)
        };
        let (nx, ny) = control_counts(&f, c.control_spacing);
        let fit = iterate_smooth_fit(&f, nx, ny, &c).unwrap();
        assert!(fit.rms_trace.len() >= 3);
        for w in fit.rms_trace[1..].windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "trace {:?}", fit.rms_trace);
        }
    }

    #[test]
    fn threshold_infinity_removes_nothing() {
        let spec = SyntheticForeheadSpec::default();
        let f = generate_synthetic_forehead(&spec, 81, 61).unwrap();
        let s = fit_penalized_spline(&f, 12, 10, &cfg(1.0)).unwrap();
        let zd = remove_wrinkled_points(&f, &s, f64::INFINITY).unwrap();
        assert_eq!(zd, f);
    }

    #[test]
    fn flat_field_keeps_all_points() {
        let f = plane_field();
        let s = fit_penalized_spline(&f, 8, 6, &cfg(0.0)).unwrap();
        assert_eq!(remove_wrinkled_points(&f, &s, 0.15).unwrap().valid_count(), f.valid_count());
    }

    #[test]
    fn eliminating_everything_is_an_error() {
        let f = plane_field();
        let s = BSplineSurface::from_greville(
            3,
            clamped_uniform_knots(5, 3, 1.0, 11.0),
            clamped_uniform_knots(5, 3, 2.0, 9.5),
            |_, _| -1000.0,
        )
        .unwrap();
        assert!(matches!(remove_wrinkled_points(&f, &s, 0.15), Err(Error::EmptySurface(_))));
    }

    #[test]
    fn smooth_contour_requires_positive_lambda() {
        assert!(matches!(build_smooth_contour(&plane_field(), 8, 6, &cfg(0.0)), Err(Error::Fit(_))));
    }

    #[test]
    fn smooth_contour_reproduces_plane_on_extended_domain() {
        let f = plane_field();
        let s = build_smooth_contour(&f, 8, 6, &cfg(1.0)).unwrap();
        let (x0, x1, y0, y1) = s.domain();
        assert!(x0 < 1.0 && x1 > 11.0 && y0 < 2.0 && y1 > 9.5);
        for k in 0..200 {
            let x = x0 + (x1 - x0) * (k % 20) as f64 / 19.0;
            let y = y0 + (y1 - y0) * (k / 20) as f64 / 9.0;
            let err = (s.evaluate(x, y).unwrap() - (2.0 * x + 3.0 * y + 1.0)).abs();
            assert!(err <= 1e-6, "error {err} at ({x}, {y})");
        }
    }
}
