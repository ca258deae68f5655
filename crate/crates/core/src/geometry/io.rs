//! On-disk height-field formats.
//!
//! `grid-csv`: a header line `# nx ny dx dy x0 y0`, then `ny` lines of `nx`
//! comma-separated heights, first line at `y0`. Missing samples are `nan`.
//!
//! `xyz-points`: one `x,y,z` triple per line; `#` lines are comments. When a
//! `# grid nx ny dx dy x0 y0` comment is present the lattice is taken from it
//! verbatim, otherwise it is inferred from the coordinates.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HeightField;
use crate::error::{Error, Result};

/// Largest tolerated deviation of a point from its grid node, as a fraction
/// of the spacing.
const GRID_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldFormat {
    GridCsv,
    XyzPoints,
}

impl FromStr for FieldFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid-csv" => Ok(FieldFormat::GridCsv),
            "xyz-points" => Ok(FieldFormat::XyzPoints),
            other => Err(Error::Config(format!(
                "unknown field format '{other}' (expected grid-csv or xyz-points)"
            ))),
        }
    }
}

pub fn load_height_field(path: impl AsRef<Path>, format: FieldFormat) -> Result<HeightField> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        FieldFormat::GridCsv => parse_grid_csv(path, &text),
        FieldFormat::XyzPoints => parse_xyz(path, &text),
    }
}

pub fn save_height_field(field: &HeightField, path: impl AsRef<Path>, format: FieldFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        FieldFormat::GridCsv => write_grid_csv(field),
        FieldFormat::XyzPoints => write_xyz(field),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn fmt_value(out: &mut String, v: f64) {
    if v.is_nan() {
        out.push_str("nan");
    } else {
        // Display for f64 prints the shortest string that parses back exactly.
        let _ = write!(out, "{v}");
    }
}

fn header(field: &HeightField) -> String {
    let (x0, y0) = field.origin();
    format!(
        "{} {} {} {} {} {}",
        field.nx(),
        field.ny(),
        field.dx(),
        field.dy(),
        x0,
        y0
    )
}

pub(crate) fn write_grid_csv(field: &HeightField) -> String {
    let mut out = String::with_capacity(field.nx() * field.ny() * 12);
    out.push_str("# ");
    out.push_str(&header(field));
    out.push('\n');
    for j in 0..field.ny() {
        for i in 0..field.nx() {
            if i > 0 {
                out.push(',');
            }
            fmt_value(&mut out, field.get(i, j).unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    out
}

fn write_xyz(field: &HeightField) -> String {
    let mut out = String::new();
    out.push_str("# grid ");
    out.push_str(&header(field));
    out.push('\n');
    for j in 0..field.ny() {
        for i in 0..field.nx() {
            fmt_value(&mut out, field.x(i));
            out.push(',');
            fmt_value(&mut out, field.y(j));
            out.push(',');
            fmt_value(&mut out, field.get(i, j).unwrap_or(f64::NAN));
            out.push('\n');
        }
    }
    out
}

fn parse_number(path: &Path, line: usize, tok: &str) -> Result<f64> {
    let tok = tok.trim();
    if tok.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    let v: f64 = tok.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("'{tok}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Validation(format!(
            "{}:{line}: non-finite value '{tok}'",
            path.display()
        )));
    }
    Ok(v)
}

struct GridHeader {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    x0: f64,
    y0: f64,
}

fn parse_header(path: &Path, line: usize, body: &str) -> Result<GridHeader> {
    let toks: Vec<&str> = body.split_whitespace().collect();
    let err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if toks.len() != 6 {
        return Err(err(format!(
            "header needs 6 fields 'nx ny dx dy x0 y0', found {}",
            toks.len()
        )));
    }
    let count = |t: &str| {
        t.parse::<usize>()
            .map_err(|_| err(format!("'{t}' is not a grid count")))
    };
    Ok(GridHeader {
        nx: count(toks[0])?,
        ny: count(toks[1])?,
        dx: parse_number(path, line, toks[2])?,
        dy: parse_number(path, line, toks[3])?,
        x0: parse_number(path, line, toks[4])?,
        y0: parse_number(path, line, toks[5])?,
    })
}

fn parse_grid_csv(path: &Path, text: &str) -> Result<HeightField> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (hline, first) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "empty file".into(),
    })?;
    let body = first.trim().strip_prefix('#').ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: hline,
        message: "first line must be '# nx ny dx dy x0 y0'".into(),
    })?;
    let h = parse_header(path, hline, body)?;
    let mut z = Vec::with_capacity(h.nx * h.ny);
    let mut rows = 0;
    for (line, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        if rows == h.ny {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("more than the declared {} rows", h.ny),
            });
        }
        let before = z.len();
        for tok in raw.split(',') {
            z.push(parse_number(path, line, tok)?);
        }
        if z.len() - before != h.nx {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} values, found {}", h.nx, z.len() - before),
            });
        }
        rows += 1;
    }
    if rows != h.ny {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: text.lines().count(),
            message: format!("expected {} rows, found {rows}", h.ny),
        });
    }
    HeightField::new(h.nx, h.ny, (h.dx, h.dy), (h.x0, h.y0), z)
}

/// Groups sorted coordinates into lattice lines and returns the estimated
/// origin and spacing.
fn infer_axis(mut values: Vec<f64>, axis: &str) -> Result<(f64, f64)> {
    values.sort_by(f64::total_cmp);
    let lo = values[0];
    let hi = values[values.len() - 1];
    if hi - lo <= 0.0 {
        return Err(Error::DegenerateExtent(format!("all points share one {axis} coordinate")));
    }
    let max_gap = values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    // Jitter within a lattice line is at most 2% of the spacing, so any gap
    // above a tenth of the largest one separates two lines.
    let split = 0.1 * max_gap;
    let mut centers = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > split {
            let c = values[start..k].iter().sum::<f64>() / (k - start) as f64;
            centers.push(c);
            start = k;
        }
    }
    if centers.len() < 2 {
        return Err(Error::DegenerateExtent(format!("points span a single {axis} line")));
    }
    let mut gaps: Vec<f64> = centers.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let spacing = gaps[0];
    let median = gaps[gaps.len() / 2];
    if spacing < 0.5 * median {
        return Err(Error::Format(format!(
            "{axis} coordinates do not form a regular lattice (line gaps {spacing} and {median}); \
             use resample_to_grid for scattered points"
        )));
    }
    Ok((centers[0], spacing))
}

fn parse_xyz(path: &Path, text: &str) -> Result<HeightField> {
    let mut declared = None;
    let mut pts = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(comment) = t.strip_prefix('#') {
            if let Some(grid) = comment.trim().strip_prefix("grid ") {
                declared = Some(parse_header(path, line, grid)?);
            }
            continue;
        }
        let toks: Vec<&str> = t.split(',').collect();
        if toks.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected 'x,y,z', found {} fields", toks.len()),
            });
        }
        let x = parse_number(path, line, toks[0])?;
        let y = parse_number(path, line, toks[1])?;
        let z = parse_number(path, line, toks[2])?;
        if x.is_nan() || y.is_nan() {
            return Err(Error::Validation(format!(
                "{}:{line}: coordinates must be finite",
                path.display()
            )));
        }
        pts.push((line, x, y, z));
    }
    if pts.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no points".into(),
        });
    }

    let (x0, dx, y0, dy, nx_hint, ny_hint) = match &declared {
        Some(h) => (h.x0, h.dx, h.y0, h.dy, Some(h.nx), Some(h.ny)),
        None => {
            let (x0, dx) = infer_axis(pts.iter().map(|p| p.1).collect(), "x")?;
            let (y0, dy) = infer_axis(pts.iter().map(|p| p.2).collect(), "y")?;
            (x0, dx, y0, dy, None, None)
        }
    };

    let snap = |v: f64, o: f64, s: f64, line: usize, axis: &str| -> Result<usize> {
        let r = (v - o) / s;
        let k = r.round();
        if k < 0.0 || (r - k).abs() > GRID_TOLERANCE {
            return Err(Error::Format(format!(
                "{}:{line}: {axis}={v} is off the regular grid by more than 1% of the spacing; \
                 use resample_to_grid for scattered points",
                path.display()
            )));
        }
        Ok(k as usize)
    };

    let mut cells = Vec::with_capacity(pts.len());
    let (mut nx, mut ny) = (0, 0);
    for &(line, x, y, z) in &pts {
        let i = snap(x, x0, dx, line, "x")?;
        let j = snap(y, y0, dy, line, "y")?;
        nx = nx.max(i + 1);
        ny = ny.max(j + 1);
        cells.push((line, i, j, z));
    }
    let nx = nx_hint.unwrap_or(nx);
    let ny = ny_hint.unwrap_or(ny);
    let mut z = vec![f64::NAN; nx * ny];
    let mut seen = vec![false; nx * ny];
    for (line, i, j, v) in cells {
        if i >= nx || j >= ny {
            return Err(Error::Format(format!(
                "{}:{line}: point lies outside the declared {nx}x{ny} grid",
                path.display()
            )));
        }
        let k = j * nx + i;
        if seen[k] {
            return Err(Error::Format(format!(
                "{}:{line}: second point for grid node ({i}, {j}); use resample_to_grid",
                path.display()
            )));
        }
        seen[k] = true;
        z[k] = v;
    }
    HeightField::new(nx, ny, (dx, dy), (x0, y0), z)
}
