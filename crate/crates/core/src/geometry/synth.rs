//! Synthetic wrinkled foreheads: a smooth quadric dome with Gaussian grooves
//! carved along polylines, plus optional uniform noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HeightField;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Groove {
    /// Centre line in patch coordinates (mm). May leave the patch; the groove
    /// is simply clipped by the grid.
    pub centerline: Vec<[f64; 2]>,
    /// Depth at the centre line (mm).
    pub depth: f64,
    /// Standard deviation of the Gaussian cross-section (mm).
    pub half_width: f64,
}

impl Groove {
    fn distance(&self, x: f64, y: f64) -> f64 {
        self.centerline
            .windows(2)
            .map(|s| segment_distance([x, y], s[0], s[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Depth of this groove below the base at `(x, y)`.
    pub fn profile(&self, x: f64, y: f64) -> f64 {
        let d = self.distance(x, y);
        self.depth * (-d * d / (2.0 * self.half_width * self.half_width)).exp()
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (abx, aby) = (b[0] - a[0], b[1] - a[1]);
    let (apx, apy) = (p[0] - a[0], p[1] - a[1]);
    let len2 = abx * abx + aby * aby;
    let t = if len2 > 0.0 {
        ((apx * abx + apy * aby) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (apx - t * abx, apy - t * aby);
    (dx * dx + dy * dy).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticForeheadSpec {
    pub width: f64,
    pub height: f64,
    /// Curvature radii of the base dome along x and y (mm); `inf` is flat.
    pub radius_x: f64,
    pub radius_y: f64,
    pub grooves: Vec<Groove>,
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl Default for SyntheticForeheadSpec {
    /// A 40 x 30 mm patch with three roughly horizontal grooves.
    fn default() -> Self {
        let line = |y: f64, wave: f64| -> Vec<[f64; 2]> {
            (0..=8)
                .map(|k| {
                    let x = -2.0 + 44.0 * k as f64 / 8.0;
                    [x, y + wave * (std::f64::consts::PI * x / 20.0).sin()]
                })
                .collect()
        };
        Self {
            width: 40.0,
            height: 30.0,
            radius_x: 120.0,
            radius_y: 90.0,
            grooves: vec![
                Groove {
                    centerline: line(8.0, 0.6),
                    depth: 0.6,
                    half_width: 1.2,
                },
                Groove {
                    centerline: line(15.0, -0.8),
                    depth: 0.8,
                    half_width: 1.4,
                },
                Groove {
                    centerline: line(22.0, 0.5),
                    depth: 0.7,
                    half_width: 1.2,
                },
            ],
            noise_amplitude: 0.01,
            seed: 7,
        }
    }
}

impl SyntheticForeheadSpec {
    pub fn flat(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            radius_x: f64::INFINITY,
            radius_y: f64::INFINITY,
            grooves: Vec::new(),
            noise_amplitude: 0.0,
            seed: 0,
        }
    }

    /// The smooth dome without grooves or noise.
    pub fn base_height(&self, x: f64, y: f64) -> f64 {
        let cx = 0.5 * self.width;
        let cy = 0.5 * self.height;
        let term = |d: f64, r: f64| if r.is_infinite() { 0.0 } else { d * d / (2.0 * r) };
        -term(x - cx, self.radius_x) - term(y - cy, self.radius_y)
    }

    /// Total groove depth below the base at `(x, y)`.
    pub fn groove_depth(&self, x: f64, y: f64) -> f64 {
        self.grooves.iter().map(|g| g.profile(x, y)).sum()
    }

    pub fn spacing(&self, nx: usize, ny: usize) -> (f64, f64) {
        (
            self.width / (nx.max(2) - 1) as f64,
            self.height / (ny.max(2) - 1) as f64,
        )
    }

    pub fn validate(&self, nx: usize, ny: usize) -> Result<()> {
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(Error::Validation("patch width and height must be positive".into()));
        }
        if !(self.radius_x > 0.0 && self.radius_y > 0.0) {
            return Err(Error::Validation("base radii must be positive (inf for flat)".into()));
        }
        let (dx, dy) = self.spacing(nx, ny);
        let min_width = 2.0 * dx.max(dy);
        for (k, g) in self.grooves.iter().enumerate() {
            if !(g.depth > 0.0) {
                return Err(Error::Validation(format!("groove {k}: depth must be positive")));
            }
            if g.half_width < min_width {
                return Err(Error::Validation(format!(
                    "groove {k}: half-width {} mm is below twice the grid spacing ({min_width} mm)",
                    g.half_width
                )));
            }
            if g.centerline.len() < 2 {
                return Err(Error::Validation(format!(
                    "groove {k}: centre line needs at least two points"
                )));
            }
        }
        if self.noise_amplitude < 0.0 {
            return Err(Error::Validation("noise amplitude must be non-negative".into()));
        }
        if let Some(min_depth) = self.grooves.iter().map(|g| g.depth).reduce(f64::min) {
            if self.noise_amplitude >= min_depth / 4.0 {
                return Err(Error::Validation(format!(
                    "noise amplitude {} mm must stay below a quarter of the shallowest groove ({min_depth} mm)",
                    self.noise_amplitude
                )));
            }
        }
        Ok(())
    }
}

/// Samples the synthetic forehead on an `nx` by `ny` grid spanning the patch,
/// origin at `(0, 0)`. Deterministic for a given spec.
pub fn generate_synthetic_forehead(spec: &SyntheticForeheadSpec, nx: usize, ny: usize) -> Result<HeightField> {
    spec.validate(nx, ny)?;
    let spacing = spec.spacing(nx, ny);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = spec.noise_amplitude;
    let mut z = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = i as f64 * spacing.0;
            let y = j as f64 * spacing.1;
            let noise = if a > 0.0 { rng.random_range(-a..=a) } else { 0.0 };
            z.push(spec.base_height(x, y) - spec.groove_depth(x, y) + noise);
        }
    }
    HeightField::new(nx, ny, spacing, (0.0, 0.0), z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_spec_is_flat() {
        let f = generate_synthetic_forehead(&SyntheticForeheadSpec::flat(10.0, 8.0), 11, 9).unwrap();
        assert!(f.z().iter().all(|&z| z == 0.0));
        assert_eq!(f.dx(), 1.0);
    }

    #[test]
    fn single_groove_depth_at_centre_line() {
        let mut spec = SyntheticForeheadSpec::flat(20.0, 20.0);
        spec.radius_x = 100.0;
        spec.radius_y = 80.0;
        spec.grooves.push(Groove {
            centerline: vec![[-5.0, 10.1], [25.0, 10.1]],
            depth: 0.8,
            half_width: 1.0,
        });
        let f = generate_synthetic_forehead(&spec, 81, 81).unwrap();
        let min_rel = f
            .valid_nodes()
            .map(|(_, _, x, y, z)| z - spec.base_height(x, y))
            .fold(f64::INFINITY, f64::min);
        // Nearest grid line to y = 10.1 is 0.1 mm away: exp(-0.005) * 0.8.
        assert!((min_rel + 0.8).abs() <= 0.02, "min relative height {min_rel}");
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let spec = SyntheticForeheadSpec::default();
        let a = generate_synthetic_forehead(&spec, 81, 61).unwrap();
        let b = generate_synthetic_forehead(&spec, 81, 61).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_forehead(&SyntheticForeheadSpec { seed: 8, ..spec }, 81, 61).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unresolvable_groove_is_rejected() {
        let mut spec = SyntheticForeheadSpec::default();
        spec.grooves[0].half_width = 0.3;
        assert!(generate_synthetic_forehead(&spec, 81, 61).is_err());
    }

    #[test]
    fn loud_noise_is_rejected() {
        let spec = SyntheticForeheadSpec {
            noise_amplitude: 0.2,
            ..SyntheticForeheadSpec::default()
        };
        assert!(spec.validate(161, 121).is_err());
    }
}
