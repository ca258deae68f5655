//! Tensor-product B-spline surfaces over clamped knot vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest polynomial degree supported by the fixed-size basis buffers.
pub const MAX_DEGREE: usize = 7;

pub(crate) type BasisBuf = [f64; MAX_DEGREE + 1];

/// Clamped knot vector with `n_ctrl - degree` equal spans on `[a, b]`.
pub fn clamped_uniform_knots(n_ctrl: usize, degree: usize, a: f64, b: f64) -> Vec<f64> {
    assert!(n_ctrl > degree, "need more control points than the degree");
    let spans = n_ctrl - degree;
    let mut knots = Vec::with_capacity(n_ctrl + degree + 1);
    knots.extend(std::iter::repeat_n(a, degree + 1));
    for k in 1..spans {
        knots.push(a + (b - a) * k as f64 / spans as f64);
    }
    knots.extend(std::iter::repeat_n(b, degree + 1));
    knots
}

/// Knot span index `s` with `knots[s] <= u < knots[s + 1]`, the last span
/// being closed on the right.
pub(crate) fn find_span(knots: &[f64], n_ctrl: usize, degree: usize, u: f64) -> usize {
    if u >= knots[n_ctrl] {
        return n_ctrl - 1;
    }
    if u <= knots[degree] {
        return degree;
    }
    let (mut lo, mut hi) = (degree, n_ctrl);
    let mut mid = (lo + hi) / 2;
    while u < knots[mid] || u >= knots[mid + 1] {
        if u < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
        mid = (lo + hi) / 2;
    }
    mid
}

/// The `degree + 1` basis functions that are non-zero on `span`, evaluated
/// at `u` (Cox-de Boor triangle).
pub(crate) fn basis_funs(knots: &[f64], span: usize, degree: usize, u: f64) -> BasisBuf {
    let mut n = [0.0; MAX_DEGREE + 1];
    let mut left = [0.0; MAX_DEGREE + 1];
    let mut right = [0.0; MAX_DEGREE + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { n[r] / denom } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Greville abscissae: the parameter positions that reproduce linear
/// functions when used as control values.
pub fn greville(knots: &[f64], n_ctrl: usize, degree: usize) -> Vec<f64> {
    (0..n_ctrl)
        .map(|i| knots[i + 1..=i + degree].iter().sum::<f64>() / degree as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineSurface {
    degree: usize,
    nx_ctrl: usize,
    ny_ctrl: usize,
    knots_x: Vec<f64>,
    knots_y: Vec<f64>,
    /// Control values, row-major: `coeffs[jy * nx_ctrl + ix]`.
    coeffs: Vec<f64>,
}

impl BSplineSurface {
    pub fn new(
        degree: usize,
        knots_x: Vec<f64>,
        knots_y: Vec<f64>,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::Validation(format!("unsupported spline degree {degree}")));
        }
        let check = |knots: &[f64], axis: &str| -> Result<usize> {
            if knots.len() < 2 * (degree + 1) {
                return Err(Error::Validation(format!("{axis} knot vector too short")));
            }
            if knots.windows(2).any(|w| !(w[1] >= w[0])) {
                return Err(Error::Validation(format!("{axis} knots must be nondecreasing")));
            }
            let n = knots.len() - degree - 1;
            let lo = &knots[..=degree];
            let hi = &knots[n..];
            if lo.iter().any(|&k| k != lo[0]) || hi.iter().any(|&k| k != hi[0]) {
                return Err(Error::Validation(format!("{axis} knots must be clamped")));
            }
            if !(knots[n] > knots[degree]) {
                return Err(Error::Validation(format!("{axis} knot domain is empty")));
            }
            Ok(n)
        };
        let nx_ctrl = check(&knots_x, "x")?;
        let ny_ctrl = check(&knots_y, "y")?;
        if coeffs.len() != nx_ctrl * ny_ctrl {
            return Err(Error::Validation(format!(
                "expected {} control values, got {}",
                nx_ctrl * ny_ctrl,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("control values must be finite".into()));
        }
        Ok(Self {
            degree,
            nx_ctrl,
            ny_ctrl,
            knots_x,
            knots_y,
            coeffs,
        })
    }

    /// Control values sampled from `f` at the Greville abscissae. Exact for
    /// any bilinear `f`.
    pub fn from_greville(
        degree: usize,
        knots_x: Vec<f64>,
        knots_y: Vec<f64>,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let nx = knots_x.len() - degree - 1;
        let ny = knots_y.len() - degree - 1;
        let gx = greville(&knots_x, nx, degree);
        let gy = greville(&knots_y, ny, degree);
        let f = &f;
        let coeffs = gy.iter().flat_map(|&y| gx.iter().map(move |&x| f(x, y))).collect();
        Self::new(degree, knots_x, knots_y, coeffs)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn control_counts(&self) -> (usize, usize) {
        (self.nx_ctrl, self.ny_ctrl)
    }

    pub fn knots_x(&self) -> &[f64] {
        &self.knots_x
    }

    pub fn knots_y(&self) -> &[f64] {
        &self.knots_y
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `(xmin, xmax, ymin, ymax)` of the knot domain.
    pub fn domain(&self) -> (f64, f64, f64, f64) {
        (
            self.knots_x[self.degree],
            self.knots_x[self.nx_ctrl],
            self.knots_y[self.degree],
            self.knots_y[self.ny_ctrl],
        )
    }

    /// Whether `(x, y)` is inside the domain, allowing a relative slack of
    /// 1e-9 for points computed in floating point from the domain ends.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, x1, y0, y1) = self.domain();
        let ex = 1e-9 * (x1 - x0).max(1.0);
        let ey = 1e-9 * (y1 - y0).max(1.0);
        x >= x0 - ex && x <= x1 + ex && y >= y0 - ey && y <= y1 + ey
    }

    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64> {
        if !self.contains(x, y) {
            return Err(Error::Domain { x, y });
        }
        Ok(self.evaluate_clamped(x, y))
    }

    /// Evaluates at the nearest in-domain point.
    pub fn evaluate_clamped(&self, x: f64, y: f64) -> f64 {
        let (x0, x1, y0, y1) = self.domain();
        let x = x.clamp(x0, x1);
        let y = y.clamp(y0, y1);
        let p = self.degree;
        let sx = find_span(&self.knots_x, self.nx_ctrl, p, x);
        let sy = find_span(&self.knots_y, self.ny_ctrl, p, y);
        let bx = basis_funs(&self.knots_x, sx, p, x);
        let by = basis_funs(&self.knots_y, sy, p, y);
        let mut z = 0.0;
        for (b, &wy) in by.iter().take(p + 1).enumerate() {
            let row = (sy - p + b) * self.nx_ctrl + (sx - p);
            let mut acc = 0.0;
            for (a, &wx) in bx.iter().take(p + 1).enumerate() {
                acc += wx * self.coeffs[row + a];
            }
            z += wy * acc;
        }
        z
    }

    /// Sum of all basis products at `(x, y)`; identically one inside the
    /// domain.
    pub fn basis_sum(&self, x: f64, y: f64) -> Result<f64> {
        if !self.contains(x, y) {
            return Err(Error::Domain { x, y });
        }
        let p = self.degree;
        let sx = find_span(&self.knots_x, self.nx_ctrl, p, x);
        let sy = find_span(&self.knots_y, self.ny_ctrl, p, y);
        let bx = basis_funs(&self.knots_x, sx, p, x);
        let by = basis_funs(&self.knots_y, sy, p, y);
        Ok(bx[..=p].iter().sum::<f64>() * by[..=p].iter().sum::<f64>())
    }

    /// Adds `dz` to the surface.
    pub fn shifted(&self, dz: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c += dz);
        out
    }

    /// Discrete thin-plate energy of the control net, the quantity the
    /// smoothing weight trades against the data residual.
    pub fn curvature_energy(&self) -> f64 {
        let rows = penalty_rows(self);
        rows.iter()
            .map(|r| {
                let v: f64 = r.iter().map(|&(k, c)| c * self.coeffs[k]).sum();
                v * v
            })
            .sum()
    }
}

/// Sparse rows of the curvature operator on the control net, already
/// scaled to be dimensionless: second divided differences along x and y over
/// the Greville abscissae and the mixed difference (weighted by sqrt 2),
/// each multiplied by the squared mean knot span.
pub(crate) fn penalty_rows(s: &BSplineSurface) -> Vec<Vec<(usize, f64)>> {
    penalty_rows_for(&s.knots_x, &s.knots_y, s.nx_ctrl, s.ny_ctrl, s.degree)
}

pub(crate) fn penalty_rows_for(
    knots_x: &[f64],
    knots_y: &[f64],
    nx: usize,
    ny: usize,
    degree: usize,
) -> Vec<Vec<(usize, f64)>> {
    let gx = greville(knots_x, nx, degree);
    let gy = greville(knots_y, ny, degree);
    let kx = (knots_x[nx] - knots_x[degree]) / (nx - degree) as f64;
    let ky = (knots_y[ny] - knots_y[degree]) / (ny - degree) as f64;
    let scale = kx * ky;
    let idx = |i: usize, j: usize| j * nx + i;
    let second = |g: &[f64], i: usize| -> [f64; 3] {
        let hl = g[i] - g[i - 1];
        let hr = g[i + 1] - g[i];
        let f = 2.0 / (hl + hr);
        [f / hl, -f * (1.0 / hl + 1.0 / hr), f / hr]
    };
    let mut rows = Vec::new();
    for j in 0..ny {
        for i in 1..nx.saturating_sub(1) {
            let c = second(&gx, i);
            rows.push(vec![
                (idx(i - 1, j), c[0] * scale),
                (idx(i, j), c[1] * scale),
                (idx(i + 1, j), c[2] * scale),
            ]);
        }
    }
    for j in 1..ny.saturating_sub(1) {
        let c = second(&gy, j);
        for i in 0..nx {
            rows.push(vec![
                (idx(i, j - 1), c[0] * scale),
                (idx(i, j), c[1] * scale),
                (idx(i, j + 1), c[2] * scale),
            ]);
        }
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = sqrt2 * scale / ((gx[i + 1] - gx[i]) * (gy[j + 1] - gy[j]));
            rows.push(vec![
                (idx(i, j), c),
                (idx(i + 1, j), -c),
                (idx(i, j + 1), -c),
                (idx(i + 1, j + 1), c),
            ]);
        }
    }
    rows
}
