//! Colour-mapped PNG rendering of grid fields with a fixed scale bar.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{load_height_field, FieldFormat, HeightField};
use crate::stress::InjuryThresholds;

/// Masked cells.
pub const NAN_COLOR: [u8; 3] = [128, 128, 128];
const FRAME_COLOR: [u8; 3] = [32, 32, 32];
const TARGET_WIDTH: usize = 640;
const BAR_GAP: usize = 4;
const BAR_HEIGHT: usize = 12;

/// Fixed colour range of one rendered quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorScale {
    pub min: f64,
    pub max: f64,
}

impl ColorScale {
    /// Residual depth, 0 to 1 mm.
    pub const DEPTH: ColorScale = ColorScale { min: 0.0, max: 1.0 };

    /// Stress up to the injury threshold of the axis, so saturated white
    /// marks injured elements.
    pub fn stress(threshold: f64) -> ColorScale {
        ColorScale {
            min: 0.0,
            max: threshold,
        }
    }

    fn normalize(&self, v: f64) -> f64 {
        ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

/// Black through red and yellow to white.
pub fn hot(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let c = |u: f64| (u.clamp(0.0, 1.0) * 255.0).round() as u8;
    [c(3.0 * t), c(3.0 * t - 1.0), c(3.0 * t - 2.0)]
}

pub fn color_of(v: Option<f64>, scale: &ColorScale) -> [u8; 3] {
    match v {
        Some(v) if v.is_finite() => hot(scale.normalize(v)),
        _ => NAN_COLOR,
    }
}

/// RGB raster: the field with +y up, then a gap and the scale bar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    /// Side of one grid cell in pixels.
    pub cell_pixels: usize,
}

impl Image {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let k = 3 * (y * self.width + x);
        [self.pixels[k], self.pixels[k + 1], self.pixels[k + 2]]
    }

    /// Height of the field part, above the scale bar.
    pub fn map_height(&self) -> usize {
        self.height - BAR_GAP - BAR_HEIGHT
    }

    fn set(&mut self, x: usize, y: usize, c: [u8; 3]) {
        let k = 3 * (y * self.width + x);
        self.pixels[k..k + 3].copy_from_slice(&c);
    }
}

pub fn render_field(field: &HeightField, scale: &ColorScale) -> Image {
    let (nx, ny) = (field.nx(), field.ny());
    let px = (TARGET_WIDTH / nx).max(1);
    let width = nx * px;
    let map_h = ny * px;
    let height = map_h + BAR_GAP + BAR_HEIGHT;
    let mut img = Image {
        width,
        height,
        pixels: vec![0; 3 * width * height],
        cell_pixels: px,
    };
    for j in 0..ny {
        for i in 0..nx {
            let c = color_of(field.get(i, j), scale);
            let top = (ny - 1 - j) * px;
            for y in top..top + px {
                for x in i * px..(i + 1) * px {
                    img.set(x, y, c);
                }
            }
        }
    }
    for y in map_h..map_h + BAR_GAP {
        for x in 0..width {
            img.set(x, y, FRAME_COLOR);
        }
    }
    for x in 0..width {
        let t = if width > 1 { x as f64 / (width - 1) as f64 } else { 0.0 };
        let c = hot(t);
        for y in map_h + BAR_GAP..height {
            img.set(x, y, c);
        }
    }
    img
}

pub fn write_png(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), image.width as u32, image.height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| Error::Format(format!("{}: {e}", path.display()));
    let mut writer = encoder.write_header().map_err(png_err)?;
    writer.write_image_data(&image.pixels).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

/// Renders the residual-depth and stress grids of a case directory next to
/// their CSV files.
pub fn render_case(dir: impl AsRef<Path>, thresholds: &InjuryThresholds) -> Result<()> {
    let dir = dir.as_ref();
    for (name, scale) in [
        ("residual_depth", ColorScale::DEPTH),
        ("sigma_x", ColorScale::stress(thresholds.sigma_x_max)),
        ("sigma_y", ColorScale::stress(thresholds.sigma_y_max)),
    ] {
        let field = load_height_field(dir.join(format!("{name}.csv")), FieldFormat::GridCsv)?;
        write_png(&render_field(&field, &scale), dir.join(format!("{name}.png")))?;
    }
    Ok(())
}
