//! Square-element particle discretization of the skin and its boundary
//! conditions.
//!
//! Particles sit on a regular `nx` by `ny` lattice with spacing `h`; each is
//! joined to its four lattice neighbours by a tension-only link whose rest
//! length is the initial 3-D distance between the two particles.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HeightField;

/// Pascals to newtons per square millimetre.
pub const PA_TO_N_PER_MM2: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Material {
    /// Elastic modulus E (Pa).
    pub youngs_modulus: f64,
    /// Density rho (kg/mm^3).
    pub density: f64,
    /// Skin thickness (mm).
    pub thickness: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            youngs_modulus: 5.0e5,
            density: 1.1e-6,
            thickness: 1.5,
        }
    }
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("elastic modulus", self.youngs_modulus),
            ("density", self.density),
            ("thickness", self.thickness),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryTag {
    Interior,
    FixedBottom,
    FixedLateral,
    LoadedTop,
    FreeTop,
}

impl BoundaryTag {
    pub fn is_fixed(self) -> bool {
        matches!(self, BoundaryTag::FixedBottom | BoundaryTag::FixedLateral)
    }

    /// Moves under the dynamics (neither held nor driven).
    pub fn is_free(self) -> bool {
        matches!(self, BoundaryTag::Interior | BoundaryTag::FreeTop)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vector3<f64>,
    /// kg
    pub mass: f64,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    /// mm
    pub rest_length: f64,
    pub axis: Axis,
    /// Cross-section carried by the link, `h * thickness` (mm^2).
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleMesh {
    nx: usize,
    ny: usize,
    spacing: f64,
    origin: (f64, f64),
    material: Material,
    particles: Vec<Particle>,
    links: Vec<Link>,
}

/// Stretching program: the loaded part of the top edge moves in +y at
/// constant speed until it has travelled `ld`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadProgram {
    /// Loading displacement L_d (mm).
    pub ld: f64,
    /// Gap d_fs between each end of the stretching line and the lateral
    /// sides (mm).
    pub dfs: f64,
    /// Boundary speed (mm/s).
    pub speed: f64,
    /// Hold the lateral sides. Released only for analytic checks.
    pub fix_lateral_sides: bool,
}

impl Default for LoadProgram {
    fn default() -> Self {
        Self {
            ld: 3.0,
            dfs: 7.58,
            speed: 0.1,
            fix_lateral_sides: true,
        }
    }
}

impl LoadProgram {
    pub fn direction(&self) -> Vector3<f64> {
        Vector3::y()
    }

    pub fn validate(&self, width: f64) -> Result<()> {
        if !(self.ld >= 0.0 && self.ld.is_finite()) {
            return Err(Error::Validation(format!("L_d must be >= 0, got {}", self.ld)));
        }
        if !(self.dfs >= 0.0 && self.dfs < width / 2.0) {
            return Err(Error::Validation(format!(
                "d_fs must lie in [0, {}) for a {width} mm wide patch, got {}",
                width / 2.0,
                self.dfs
            )));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::Validation(format!("loading speed must be positive, got {}", self.speed)));
        }
        Ok(())
    }
}

/// Builds the particle lattice over the field with spacing `h`. When `h` is
/// a multiple of the field spacing the nodes are taken directly, otherwise
/// heights are interpolated bilinearly.
pub fn discretize(field: &HeightField, h: f64, material: &Material) -> Result<ParticleMesh> {
    material.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Validation(format!("mesh spacing must be positive, got {h}")));
    }
    let (x0, x1, y0, y1) = field.extent();
    let nx = ((x1 - x0) / h + 1e-9).floor() as usize + 1;
    let ny = ((y1 - y0) / h + 1e-9).floor() as usize + 1;
    if nx < 2 || ny < 2 {
        return Err(Error::Validation(format!(
            "mesh spacing {h} mm leaves fewer than two particles per axis"
        )));
    }
    let stride = |d: f64| {
        let r = h / d;
        let k = r.round();
        (k >= 1.0 && (r - k).abs() < 1e-9).then_some(k as usize)
    };
    let strides = stride(field.dx()).zip(stride(field.dy()));
    let mass = material.density * h * h * material.thickness;
    let mut particles = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (x, y, z) = match strides {
                Some((sx, sy)) => {
                    let (fi, fj) = (i * sx, j * sy);
                    (field.x(fi), field.y(fj), field.get(fi, fj))
                }
                None => {
                    let (x, y) = (x0 + i as f64 * h, y0 + j as f64 * h);
                    (x, y, field.sample_bilinear(x, y))
                }
            };
            let z = z.ok_or_else(|| {
                Error::Validation(format!("height field has no valid sample under particle ({i}, {j})"))
            })?;
            particles.push(Particle {
                position: Vector3::new(x, y, z),
                mass,
                tag: BoundaryTag::Interior,
            });
        }
    }
    let area = h * material.thickness;
    let mut links = Vec::with_capacity(nx * (ny - 1) + ny * (nx - 1));
    let mut push = |a: usize, b: usize, axis: Axis, particles: &[Particle]| -> Result<()> {
        let rest_length = (particles[b].position - particles[a].position).norm();
        if !(rest_length > 0.0) {
            return Err(Error::Validation(format!("particles {a} and {b} coincide")));
        }
        links.push(Link {
            a,
            b,
            rest_length,
            axis,
            area,
        });
        Ok(())
    };
    for j in 0..ny {
        for i in 0..nx - 1 {
            push(j * nx + i, j * nx + i + 1, Axis::X, &particles)?;
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            push(j * nx + i, (j + 1) * nx + i, Axis::Y, &particles)?;
        }
    }
    Ok(ParticleMesh {
        nx,
        ny,
        spacing: h,
        origin: (x0, y0),
        material: *material,
        particles,
        links,
    })
}

/// Tags the boundary: bottom row and (optionally) both lateral columns are
/// fixed; top-row particles more than `dfs` from both lateral sides form the
/// stretching line; the rest of the top row is left free.
pub fn apply_boundary_conditions(mesh: &ParticleMesh, program: &LoadProgram) -> Result<ParticleMesh> {
    program.validate(mesh.width())?;
    let mut out = mesh.clone();
    let (nx, ny) = (mesh.nx, mesh.ny);
    let x_left = mesh.origin.0;
    let x_right = mesh.origin.0 + mesh.width();
    let mut loaded = 0;
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let x = mesh.particles[k].position.x;
            let lateral = i == 0 || i == nx - 1;
            let tag = if j == 0 {
                BoundaryTag::FixedBottom
            } else if lateral && program.fix_lateral_sides {
                BoundaryTag::FixedLateral
            } else if j == ny - 1 {
                let on_line = program.dfs == 0.0 || (x - x_left > program.dfs && x_right - x > program.dfs);
                if on_line {
                    loaded += 1;
                    BoundaryTag::LoadedTop
                } else {
                    BoundaryTag::FreeTop
                }
            } else {
                BoundaryTag::Interior
            };
            out.particles[k].tag = tag;
        }
    }
    if loaded < 2 {
        return Err(Error::Config(format!(
            "d_fs = {} mm leaves {loaded} loaded particle(s) on the top side; at least 2 are needed",
            program.dfs
        )));
    }
    Ok(out)
}

impl ParticleMesh {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn width(&self) -> f64 {
        (self.nx - 1) as f64 * self.spacing
    }

    pub fn height(&self) -> f64 {
        (self.ny - 1) as f64 * self.spacing
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Axial stiffness `E A / L0` of a link (N/mm).
    pub fn link_stiffness(&self, link: &Link) -> f64 {
        self.material.youngs_modulus * PA_TO_N_PER_MM2 * link.area / link.rest_length
    }

    /// Number of links meeting at each particle.
    pub fn valence(&self) -> Vec<usize> {
        let mut v = vec![0; self.particles.len()];
        for l in &self.links {
            v[l.a] += 1;
            v[l.b] += 1;
        }
        v
    }

    pub fn total_mass(&self) -> f64 {
        self.particles.iter().map(|p| p.mass).sum()
    }

    pub fn count_tag(&self, tag: BoundaryTag) -> usize {
        self.particles.iter().filter(|p| p.tag == tag).count()
    }

    /// First x-link index of row `j`; x-links are stored row by row, then
    /// y-links row by row.
    pub fn x_link_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx - 1) + i
    }

    pub fn y_link_index(&self, i: usize, j: usize) -> usize {
        self.ny * (self.nx - 1) + j * self.nx + i
    }
}
