//! WebAssembly bindings for the browser demo: synthesize a forehead patch
//! with its support contour, extract its wrinkles, and stretch it.
//!
//! The plain Rust functions (`synthesize_patch`, `wrinkle_depth`,
//! `stretch_patch`) carry the logic; the exported wrappers only convert
//! errors for JavaScript.

use skinstretch::geometry::{generate_synthetic_forehead, HeightField, SyntheticForeheadSpec};
use skinstretch::sweep::{prepare, solve_case, support_for, InputSource, RunConfig};
use skinstretch::wrinkles::wrinkle_map_of;
use skinstretch::Error;
use wasm_bindgen::prelude::*;

/// Input grid of the demo, 0.5 mm over the 40 x 30 mm patch.
pub const DEMO_NX: usize = 81;
pub const DEMO_NY: usize = 61;

/// Row-major grid with +y rows stored bottom first; NaN marks masked nodes.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    spacing: f64,
    values: Vec<f64>,
}

#[wasm_bindgen]
impl Grid {
    #[wasm_bindgen(getter)]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[wasm_bindgen(getter)]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[wasm_bindgen(getter)]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    /// Smallest finite value, 0 for an all-masked grid.
    pub fn min(&self) -> f64 {
        finite_or_zero(self.finite().fold(f64::INFINITY, f64::min))
    }

    /// Largest finite value, 0 for an all-masked grid.
    pub fn max(&self) -> f64 {
        finite_or_zero(self.finite().fold(f64::NEG_INFINITY, f64::max))
    }
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

impl Grid {
    fn finite(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied().filter(|v| v.is_finite())
    }

    pub fn of(field: &HeightField) -> Self {
        let values = (0..field.ny())
            .flat_map(|j| (0..field.nx()).map(move |i| (i, j)))
            .map(|(i, j)| field.get(i, j).unwrap_or(f64::NAN))
            .collect();
        Self {
            nx: field.nx(),
            ny: field.ny(),
            spacing: field.dx(),
            values,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }
}

fn spec(seed: u64, noise: f64) -> SyntheticForeheadSpec {
    SyntheticForeheadSpec {
        seed,
        noise_amplitude: noise,
        ..SyntheticForeheadSpec::default()
    }
}

fn demo_config(seed: u64, noise: f64) -> RunConfig {
    RunConfig {
        input: InputSource::Synthetic {
            nx: DEMO_NX,
            ny: DEMO_NY,
            spec: spec(seed, noise),
        },
        mesh_spacing: 2.0,
        residual_spacing: 0.5,
        ..RunConfig::default()
    }
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Patch {
    height: Grid,
    support: Grid,
    offset: f64,
}

#[wasm_bindgen]
impl Patch {
    #[wasm_bindgen(getter)]
    pub fn height(&self) -> Grid {
        self.height.clone()
    }

    /// Support contour sampled on the same grid.
    #[wasm_bindgen(getter)]
    pub fn support(&self) -> Grid {
        self.support.clone()
    }

    /// How far the smooth contour was lowered (mm).
    #[wasm_bindgen(getter)]
    pub fn offset(&self) -> f64 {
        self.offset
    }
}

pub fn synthesize_patch(seed: u64, noise: f64) -> Result<Patch, Error> {
    let config = demo_config(seed, noise);
    let field = config.input.load()?;
    let support = support_for(&field, &config)?;
    let z = (0..field.ny())
        .flat_map(|j| (0..field.nx()).map(move |i| (i, j)))
        .map(|(i, j)| support.height(field.x(i), field.y(j)).unwrap_or(f64::NAN))
        .collect();
    Ok(Patch {
        height: Grid::of(&field),
        support: Grid {
            nx: field.nx(),
            ny: field.ny(),
            spacing: field.dx(),
            values: z,
        },
        offset: support.offset(),
    })
}

/// Depth of the cleaned wrinkle map; zero outside wrinkles.
pub fn wrinkle_depth(seed: u64, noise: f64, threshold: f64) -> Result<Grid, Error> {
    let mut config = demo_config(seed, noise);
    config.wrinkles.threshold = threshold;
    config.validate()?;
    let field = generate_synthetic_forehead(&spec(seed, noise), DEMO_NX, DEMO_NY)?;
    let map = wrinkle_map_of(&field, &config.smoothing, &config.wrinkles)?;
    Ok(Grid::of(&map.depth_field()?))
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Stretch {
    sigma_x: Grid,
    sigma_y: Grid,
    residual: Grid,
    report: String,
}

#[wasm_bindgen]
impl Stretch {
    /// Pa
    #[wasm_bindgen(getter)]
    pub fn sigma_x(&self) -> Grid {
        self.sigma_x.clone()
    }

    /// Pa
    #[wasm_bindgen(getter)]
    pub fn sigma_y(&self) -> Grid {
        self.sigma_y.clone()
    }

    /// Residual wrinkle depth (mm).
    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> Grid {
        self.residual.clone()
    }

    /// Case report as JSON.
    #[wasm_bindgen(getter)]
    pub fn report(&self) -> String {
        self.report.clone()
    }
}

/// Stretches the demo patch on a coarse 2 mm mesh.
pub fn stretch_patch(seed: u64, ld: f64, dfs: f64, speed: f64) -> Result<Stretch, Error> {
    let mut config = demo_config(seed, SyntheticForeheadSpec::default().noise_amplitude);
    config.load.ld = ld;
    config.load.dfs = dfs;
    config.load.speed = speed;
    let prepared = prepare(&config)?;
    let outcome = solve_case(&prepared, &config)?;
    let report = serde_json::to_string(&outcome.report).map_err(|e| Error::Format(e.to_string()))?;
    Ok(Stretch {
        sigma_x: Grid::of(&outcome.stress.sigma_x.to_field()?),
        sigma_y: Grid::of(&outcome.stress.sigma_y.to_field()?),
        residual: Grid::of(&outcome.residual_map.depth_field()?),
        report,
    })
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn synthesize(seed: u32, noise: f64) -> Result<Patch, JsError> {
    synthesize_patch(seed.into(), noise).map_err(js)
}

#[wasm_bindgen]
pub fn wrinkles(seed: u32, noise: f64, threshold: f64) -> Result<Grid, JsError> {
    wrinkle_depth(seed.into(), noise, threshold).map_err(js)
}

#[wasm_bindgen]
pub fn stretch(seed: u32, ld: f64, dfs: f64, speed: f64) -> Result<Stretch, JsError> {
    stretch_patch(seed.into(), ld, dfs, speed).map_err(js)
}
