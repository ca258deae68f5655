//! Run configuration, the single-case pipeline and parameter sweeps over
//! the loading displacement and the stretching-line gap.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::geometry::{generate_synthetic_forehead, load_height_field, save_height_field, FieldFormat, HeightField, SyntheticForeheadSpec};
use crate::mesh::{apply_boundary_conditions, discretize, LoadProgram, Material, ParticleMesh};
use crate::solver::{run_to_equilibrium, ConvergenceConfig, ConvergenceTrace, SolverState};
use crate::stress::{classify_injury, element_stresses, InjuryThresholds, StressField};
use crate::surface::{
    build_smooth_contour, build_support_contour, control_counts, iterate_smooth_fit, remove_wrinkled_points,
    SmoothingConfig, SupportContour,
};
use crate::wrinkles::{measure_residual, WrinkleConfig, WrinkleMap, WrinkleReference, WrinkleReport, REPORT_CSV_HEADER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InputSource {
    Synthetic {
        nx: usize,
        ny: usize,
        #[serde(default)]
        spec: SyntheticForeheadSpec,
    },
    File {
        path: PathBuf,
        #[serde(default = "default_format")]
        format: FieldFormat,
    },
}

fn default_format() -> FieldFormat {
    FieldFormat::GridCsv
}

impl Default for InputSource {
    fn default() -> Self {
        InputSource::Synthetic {
            nx: 161,
            ny: 121,
            spec: SyntheticForeheadSpec::default(),
        }
    }
}

impl InputSource {
    pub fn load(&self) -> Result<HeightField> {
        match self {
            InputSource::Synthetic { nx, ny, spec } => generate_synthetic_forehead(spec, *nx, *ny),
            InputSource::File { path, format } => load_height_field(path, *format),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSource,
    pub material: Material,
    /// Particle spacing h (mm).
    pub mesh_spacing: f64,
    /// Grid spacing of the deformed-surface raster used for residual
    /// wrinkles (mm).
    pub residual_spacing: f64,
    pub smoothing: SmoothingConfig,
    pub load: LoadProgram,
    pub convergence: ConvergenceConfig,
    pub wrinkles: WrinkleConfig,
    pub injury: InjuryThresholds,
    /// A residual area more than this fraction above the best uninjured
    /// case counts as not enough stretched.
    pub classification_margin: f64,
    /// Sweep cases run at once.
    pub parallelism: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: InputSource::default(),
            material: Material::default(),
            mesh_spacing: 1.0,
            residual_spacing: 0.25,
            smoothing: SmoothingConfig::default(),
            load: LoadProgram::default(),
            convergence: ConvergenceConfig::default(),
            wrinkles: WrinkleConfig::default(),
            injury: InjuryThresholds::default(),
            classification_margin: 0.25,
            parallelism: 1,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every nested invariant that does not need the input field.
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.smoothing.validate()?;
        self.convergence.validate()?;
        self.wrinkles.validate()?;
        self.injury.validate()?;
        for (name, v) in [("mesh_spacing", self.mesh_spacing), ("residual_spacing", self.residual_spacing)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.classification_margin >= 0.0) {
            return Err(Error::Validation("classification_margin must be >= 0".into()));
        }
        if self.parallelism == 0 {
            return Err(Error::Validation("parallelism must be at least 1".into()));
        }
        if let InputSource::Synthetic { nx, ny, spec } = &self.input {
            spec.validate(*nx, *ny)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    NotEnoughStretched,
    Appropriate,
    Overstretched,
}

impl Classification {
    pub fn label(self) -> &'static str {
        match self {
            Classification::NotEnoughStretched => "not-enough-stretched",
            Classification::Appropriate => "appropriate",
            Classification::Overstretched => "overstretched",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressSummary {
    /// Pa
    pub max_sigma_x: f64,
    /// Element centre of the x maximum (mm).
    pub argmax_sigma_x: (f64, f64),
    pub max_sigma_y: f64,
    pub argmax_sigma_y: (f64, f64),
}

impl StressSummary {
    fn of(field: &StressField) -> Self {
        Self {
            max_sigma_x: field.sigma_x.max,
            argmax_sigma_x: field.sigma_x.argmax_location(),
            max_sigma_y: field.sigma_y.max,
            argmax_sigma_y: field.sigma_y.argmax_location(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjuryFlags {
    pub overstretched_x: bool,
    pub overstretched_y: bool,
    pub offending_elements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub config: RunConfig,
    pub converged: bool,
    pub steps: u64,
    /// s
    pub simulated_time: f64,
    pub min_time_scale: f64,
    /// Lowest normal clearance to the support over the trace rows (mm).
    pub min_clearance: f64,
    /// Largest kinetic-energy growth over any 100 relaxing steps (J).
    pub relax_ke_growth: f64,
    /// Lowering of the smooth contour that forms the support (mm).
    pub support_offset: f64,
    /// Wrinkles of the unstretched membrane; the reference for `residual`.
    pub reference: WrinkleReport,
    pub residual: WrinkleReport,
    pub stress: StressSummary,
    pub injury: InjuryFlags,
    /// `None` for unconverged cases.
    pub classification: Option<Classification>,
    pub trace_file: String,
}

impl CaseReport {
    pub fn csv_row(&self) -> String {
        self.residual.csv_row(self.config.load.ld, self.config.load.dfs)
    }
}

/// Everything a case needs before the load program is applied; shared by
/// all cases of a sweep.
#[derive(Debug, Clone)]
pub struct PreparedInput {
    pub field: HeightField,
    pub support: SupportContour,
    pub mesh: ParticleMesh,
    pub reference: WrinkleReport,
    pub reference_map: WrinkleMap,
}

pub fn prepare(config: &RunConfig) -> Result<PreparedInput> {
    config.validate()?;
    let field = config.input.load().stage("geometry")?;
    let support = support_for(&field, config).stage("surface")?;
    let mesh = discretize(&field, config.mesh_spacing, &config.material).stage("mesh")?;
    let (reference, reference_map) = measure_residual(
        &mesh,
        &mesh.particles().iter().map(|p| p.position).collect::<Vec<_>>(),
        config.residual_spacing,
        &config.smoothing,
        &config.wrinkles,
        None,
    )
    .stage("wrinkles")?;
    Ok(PreparedInput {
        field,
        support,
        mesh,
        reference,
        reference_map,
    })
}

/// Smooth fit, wrinkle-point removal, smooth contour and lowered support.
pub fn support_for(field: &HeightField, config: &RunConfig) -> Result<SupportContour> {
    let s = &config.smoothing;
    let (nxc, nyc) = control_counts(field, s.control_spacing);
    let fit = iterate_smooth_fit(field, nxc, nyc, s)?;
    let zd = remove_wrinkled_points(field, &fit.surface, s.wrinkle_threshold)?;
    let zs = build_smooth_contour(&zd, nxc, nyc, s)?;
    build_support_contour(&zs, field, config.mesh_spacing)
}

/// Solved case with its artifacts still in memory.
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub report: CaseReport,
    pub state: SolverState,
    pub trace: ConvergenceTrace,
    pub stress: StressField,
    pub residual_map: WrinkleMap,
}

/// Steps per window of the relaxing-phase dissipation check.
pub const KE_WINDOW: usize = 100;

/// Empty traces yield infinities, which JSON cannot carry.
fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

pub fn solve_case(prepared: &PreparedInput, config: &RunConfig) -> Result<CaseOutcome> {
    config.validate()?;
    let mesh = apply_boundary_conditions(&prepared.mesh, &config.load).stage("mesh")?;
    let (state, trace) = run_to_equilibrium(&mesh, &prepared.support, &config.load, &config.convergence).stage("solver")?;
    let stress = element_stresses(&mesh, &state);
    let injury = classify_injury(&stress, &config.injury);
    let reference = WrinkleReference {
        max_depth: prepared.reference.max_depth,
        mean_depth: prepared.reference.mean_depth,
    };
    let reference = (prepared.reference.count > 0).then_some(reference);
    let (residual, residual_map) = measure_residual(
        &mesh,
        &state.positions,
        config.residual_spacing,
        &config.smoothing,
        &config.wrinkles,
        reference,
    )
    .stage("wrinkles")?;
    let report = CaseReport {
        config: config.clone(),
        converged: trace.converged,
        steps: state.step,
        simulated_time: state.t,
        min_time_scale: trace.min_time_scale,
        min_clearance: finite_or_zero(trace.min_clearance()),
        relax_ke_growth: finite_or_zero(trace.worst_window_growth(KE_WINDOW)),
        support_offset: prepared.support.offset(),
        reference: prepared.reference.clone(),
        residual,
        stress: StressSummary::of(&stress),
        injury: InjuryFlags {
            overstretched_x: injury.overstretched_x,
            overstretched_y: injury.overstretched_y,
            offending_elements: injury.offending.len(),
        },
        classification: None,
        trace_file: "trace.csv".into(),
    };
    let mut outcome = CaseOutcome {
        report,
        state,
        trace,
        stress,
        residual_map,
    };
    classify_cases(std::slice::from_mut(&mut outcome.report), config.classification_margin);
    Ok(outcome)
}

/// Runs the whole pipeline for one configuration and writes its artifacts
/// when an output directory is set.
pub fn run_case(config: &RunConfig) -> Result<CaseOutcome> {
    let prepared = prepare(config)?;
    let outcome = solve_case(&prepared, config)?;
    if let Some(dir) = &config.output_dir {
        write_case(dir, &outcome)?;
    }
    Ok(outcome)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes stress and residual-depth grids, the report row, the trace and
/// the JSON report into `dir`.
pub fn write_case(dir: &Path, outcome: &CaseOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_height_field(&outcome.stress.sigma_x.to_field()?, dir.join("sigma_x.csv"), FieldFormat::GridCsv)?;
    save_height_field(&outcome.stress.sigma_y.to_field()?, dir.join("sigma_y.csv"), FieldFormat::GridCsv)?;
    save_height_field(
        &outcome.residual_map.depth_field()?,
        dir.join("residual_depth.csv"),
        FieldFormat::GridCsv,
    )?;
    write_text(
        &dir.join("report.csv"),
        &format!("{REPORT_CSV_HEADER}\n{}\n", outcome.report.csv_row()),
    )?;
    write_text(&dir.join(&outcome.report.trace_file), &outcome.trace.to_csv())?;
    write_report_json(&dir.join("report.json"), &outcome.report)
}

fn write_report_json(path: &Path, report: &CaseReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Format(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn read_case_report(path: impl AsRef<Path>) -> Result<CaseReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Labels converged cases: injured ones are overstretched; among the rest,
/// a residual area above `(1 + margin)` times the smallest one is not
/// enough stretched.
pub fn classify_cases(cases: &mut [CaseReport], margin: f64) {
    let best = cases
        .iter()
        .filter(|c| c.converged && !(c.injury.overstretched_x || c.injury.overstretched_y))
        .map(|c| c.residual.area)
        .fold(f64::INFINITY, f64::min);
    for c in cases.iter_mut() {
        c.classification = if !c.converged {
            None
        } else if c.injury.overstretched_x || c.injury.overstretched_y {
            Some(Classification::Overstretched)
        } else if c.residual.area > (1.0 + margin) * best {
            Some(Classification::NotEnoughStretched)
        } else {
            Some(Classification::Appropriate)
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub ld_values: Vec<f64>,
    pub dfs_values: Vec<f64>,
    pub margin: f64,
    /// Cases in `L_d`-major order.
    pub cases: Vec<CaseReport>,
}

impl SweepReport {
    pub fn case(&self, ld: f64, dfs: f64) -> Option<&CaseReport> {
        self.cases.iter().find(|c| c.config.load.ld == ld && c.config.load.dfs == dfs)
    }

    /// Report rows of every case.
    pub fn table_csv(&self) -> String {
        let mut s = format!("{REPORT_CSV_HEADER}\n");
        for c in &self.cases {
            s.push_str(&c.csv_row());
            s.push('\n');
        }
        s
    }

    /// Classification grid: one row per `L_d`, one column per `d_fs`.
    pub fn classification_csv(&self) -> String {
        let mut s = String::from("Ld\\dfs");
        for d in &self.dfs_values {
            let _ = write!(s, ",{d}");
        }
        s.push('\n');
        for &ld in &self.ld_values {
            let _ = write!(s, "{ld}");
            for &dfs in &self.dfs_values {
                let label = self
                    .case(ld, dfs)
                    .and_then(|c| c.classification)
                    .map_or("unconverged", Classification::label);
                let _ = write!(s, ",{label}");
            }
            s.push('\n');
        }
        s
    }
}

/// Directory name of one sweep case.
pub fn case_dir_name(ld: f64, dfs: f64) -> String {
    format!("ld{ld}_dfs{dfs}")
}

/// Runs every `(L_d, d_fs)` combination, up to `base.parallelism` at once,
/// then classifies them together. With an output directory each case gets
/// its own subdirectory and the summary tables are written at the top.
pub fn run_sweep(base: &RunConfig, ld_values: &[f64], dfs_values: &[f64]) -> Result<SweepReport> {
    if ld_values.is_empty() || dfs_values.is_empty() {
        return Err(Error::Validation("sweep value lists must be nonempty".into()));
    }
    let prepared = prepare(base)?;
    let configs: Vec<RunConfig> = ld_values
        .iter()
        .flat_map(|&ld| dfs_values.iter().map(move |&dfs| (ld, dfs)))
        .map(|(ld, dfs)| {
            let mut c = base.clone();
            c.load.ld = ld;
            c.load.dfs = dfs;
            c.output_dir = base.output_dir.as_ref().map(|d| d.join(case_dir_name(ld, dfs)));
            c
        })
        .collect();
    let results: Vec<Mutex<Option<Result<CaseOutcome>>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = base.parallelism.min(configs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= configs.len() {
                    break;
                }
                let r = solve_case(&prepared, &configs[k]);
                *results[k].lock().expect("result slot poisoned") = Some(r);
            });
        }
    });
    let mut outcomes = Vec::with_capacity(configs.len());
    for slot in results {
        outcomes.push(slot.into_inner().expect("result slot poisoned").expect("case was not run")?);
    }
    if outcomes.iter().all(|o| !o.report.converged) {
        return Err(Error::NonConvergence {
            message: "no sweep case reached equilibrium".into(),
            trace: Vec::new(),
        });
    }
    let mut reports: Vec<CaseReport> = outcomes.iter().map(|o| o.report.clone()).collect();
    classify_cases(&mut reports, base.classification_margin);
    for (o, r) in outcomes.iter_mut().zip(&reports) {
        o.report.classification = r.classification;
    }
    let sweep = SweepReport {
        ld_values: ld_values.to_vec(),
        dfs_values: dfs_values.to_vec(),
        margin: base.classification_margin,
        cases: reports,
    };
    if let Some(dir) = &base.output_dir {
        for o in &outcomes {
            let case_dir = o.report.config.output_dir.as_ref().expect("case directory set");
            write_case(case_dir, o)?;
        }
        write_text(&dir.join("sweep.csv"), &sweep.table_csv())?;
        write_text(&dir.join("classification.csv"), &sweep.classification_csv())?;
        let json = serde_json::to_string_pretty(&sweep).map_err(|e| Error::Format(e.to_string()))?;
        write_text(&dir.join("sweep.json"), &(json + "\n"))?;
    }
    Ok(sweep)
}
