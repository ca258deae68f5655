//! `skinstretch` command-line driver.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 the solver
//! did not reach equilibrium, 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use skinstretch::geometry::{generate_synthetic_forehead, load_height_field, save_height_field, FieldFormat, SyntheticForeheadSpec};
use skinstretch::render::render_case;
use skinstretch::sweep::{read_case_report, run_case, run_sweep, InputSource, RunConfig};
use skinstretch::wrinkles::{wrinkle_map_of, wrinkle_parameters};
use skinstretch::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "skinstretch", version, about = "Simulate stretching of wrinkled forehead skin over its smooth contour")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one stretching case and write its report, grids and trace.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also render PNG maps of the results.
        #[arg(long)]
        render: bool,
    },
    /// Run every combination of the given loading displacements and gaps.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Loading displacements L_d (mm), comma separated.
        #[arg(long = "lds", value_delimiter = ',', required = true)]
        lds: Vec<f64>,
        /// Stretching-line gaps d_fs (mm), comma separated.
        #[arg(long = "dfss", value_delimiter = ',', required = true)]
        dfss: Vec<f64>,
        #[arg(long)]
        render: bool,
    },
    /// Write a synthetic wrinkled forehead height field.
    Synth {
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, default_value = "grid-csv")]
        format: FieldFormat,
        #[arg(long, default_value_t = 161)]
        nx: usize,
        #[arg(long, default_value_t = 121)]
        ny: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Noise amplitude (mm).
        #[arg(long)]
        noise: Option<f64>,
        /// Omit the grooves.
        #[arg(long)]
        flat: bool,
    },
    /// Extract wrinkles from a height field and print their parameters.
    Metrics {
        input: PathBuf,
        #[arg(long, default_value = "grid-csv")]
        format: FieldFormat,
        /// Optional TOML run configuration for smoothing and wrinkle settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the depth grid here.
        #[arg(long)]
        depth_output: Option<PathBuf>,
    },
    /// Render the grids of a finished case directory as PNG maps.
    Render { case_dir: PathBuf },
}

/// Every run-configuration field as a flag; unset flags keep the file or
/// default value.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Generic override `dotted.path=value`, value in TOML syntax.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,

    /// Height-field file; replaces the synthetic input.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    input_format: Option<FieldFormat>,
    /// Synthetic grid size.
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,

    /// Pa
    #[arg(long)]
    youngs_modulus: Option<f64>,
    /// kg/mm^3
    #[arg(long)]
    density: Option<f64>,
    /// mm
    #[arg(long)]
    thickness: Option<f64>,

    #[arg(long)]
    mesh_spacing: Option<f64>,
    #[arg(long)]
    residual_spacing: Option<f64>,

    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    fit_threshold: Option<f64>,
    #[arg(long)]
    fit_max_iterations: Option<usize>,
    #[arg(long)]
    fit_tolerance: Option<f64>,
    #[arg(long)]
    control_spacing: Option<f64>,

    #[arg(long)]
    ld: Option<f64>,
    #[arg(long)]
    dfs: Option<f64>,
    /// mm/s
    #[arg(long)]
    speed: Option<f64>,
    /// Leave the lateral sides free instead of fixed.
    #[arg(long)]
    free_lateral_sides: bool,

    #[arg(long)]
    ke_threshold: Option<f64>,
    #[arg(long)]
    mean_speed_threshold: Option<f64>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    trace_every: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    time_scale: Option<f64>,

    #[arg(long)]
    wrinkle_threshold: Option<f64>,
    #[arg(long)]
    open_radius: Option<usize>,
    #[arg(long)]
    min_component_area: Option<f64>,

    #[arg(long)]
    sigma_x_max: Option<f64>,
    #[arg(long)]
    sigma_y_max: Option<f64>,

    #[arg(long)]
    classification_margin: Option<f64>,
    #[arg(long, short = 'j')]
    parallelism: Option<usize>,
}

fn set_if<T: Copy>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(path) = &self.input {
            c.input = InputSource::File {
                path: path.clone(),
                format: self.input_format.unwrap_or(FieldFormat::GridCsv),
            };
        } else if let Some(f) = self.input_format {
            if let InputSource::File { format, .. } = &mut c.input {
                *format = f;
            }
        }
        if let InputSource::Synthetic { nx, ny, spec } = &mut c.input {
            set_if(nx, self.nx);
            set_if(ny, self.ny);
            set_if(&mut spec.seed, self.seed);
        }
        set_if(&mut c.material.youngs_modulus, self.youngs_modulus);
        set_if(&mut c.material.density, self.density);
        set_if(&mut c.material.thickness, self.thickness);
        set_if(&mut c.mesh_spacing, self.mesh_spacing);
        set_if(&mut c.residual_spacing, self.residual_spacing);
        set_if(&mut c.smoothing.lambda, self.lambda);
        set_if(&mut c.smoothing.wrinkle_threshold, self.fit_threshold);
        set_if(&mut c.smoothing.max_iterations, self.fit_max_iterations);
        set_if(&mut c.smoothing.convergence_tol, self.fit_tolerance);
        set_if(&mut c.smoothing.control_spacing, self.control_spacing);
        set_if(&mut c.load.ld, self.ld);
        set_if(&mut c.load.dfs, self.dfs);
        set_if(&mut c.load.speed, self.speed);
        if self.free_lateral_sides {
            c.load.fix_lateral_sides = false;
        }
        set_if(&mut c.convergence.ke_threshold, self.ke_threshold);
        set_if(&mut c.convergence.mean_speed_threshold, self.mean_speed_threshold);
        set_if(&mut c.convergence.max_steps, self.max_steps);
        set_if(&mut c.convergence.trace_every, self.trace_every);
        if self.dt.is_some() {
            c.convergence.dt = self.dt;
        }
        if self.alpha.is_some() {
            c.convergence.alpha = self.alpha;
        }
        if self.time_scale.is_some() {
            c.convergence.time_scale = self.time_scale;
        }
        set_if(&mut c.wrinkles.threshold, self.wrinkle_threshold);
        set_if(&mut c.wrinkles.open_radius, self.open_radius);
        set_if(&mut c.wrinkles.min_component_area, self.min_component_area);
        set_if(&mut c.injury.sigma_x_max, self.sigma_x_max);
        set_if(&mut c.injury.sigma_y_max, self.sigma_y_max);
        set_if(&mut c.classification_margin, self.classification_margin);
        set_if(&mut c.parallelism, self.parallelism);
        if let Some(o) = &self.output {
            c.output_dir = Some(o.clone());
        }
        let c = apply_sets(c, &self.set)?;
        c.validate()?;
        Ok(c)
    }
}

/// Applies `a.b.c=value` overrides through the TOML representation so any
/// field can be reached.
fn apply_sets(config: RunConfig, sets: &[String]) -> Result<RunConfig, Error> {
    if sets.is_empty() {
        return Ok(config);
    }
    let mut root = toml::Value::try_from(&config).map_err(|e| Error::Config(e.to_string()))?;
    for s in sets {
        let (path, raw) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects PATH=VALUE, got {s:?}")))?;
        let value = parse_toml_value(raw.trim());
        let keys: Vec<&str> = path.trim().split('.').collect();
        let mut node = &mut root;
        for (depth, key) in keys.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("{path}: {key} is not inside a table")))?;
            if depth + 1 == keys.len() {
                table.insert((*key).to_string(), value.clone());
                break;
            }
            node = table
                .entry((*key).to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
    }
    root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

/// A TOML literal, or a bare string when it does not parse as one.
fn parse_toml_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn exit_code_for(err: &Error) -> u8 {
    if err.is_validation() {
        EXIT_VALIDATION
    } else if matches!(err.root(), Error::NonConvergence { .. }) {
        EXIT_NONCONVERGENCE
    } else {
        EXIT_FAILURE
    }
}

fn write_json(value: &impl serde::Serialize) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn render_if(render: bool, dir: Option<&Path>, config: &RunConfig) -> Result<(), Error> {
    match (render, dir) {
        (true, Some(d)) => render_case(d, &config.injury),
        (true, None) => Err(Error::Config("--render needs an output directory".into())),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate { config, render } => {
            let c = config.resolve()?;
            let outcome = run_case(&c)?;
            render_if(render, c.output_dir.as_deref(), &c)?;
            write_json(&outcome.report)?;
            if !outcome.report.converged {
                log::error!("case stopped at max_steps before reaching equilibrium");
                return Ok(EXIT_NONCONVERGENCE);
            }
        }
        Command::Sweep {
            config,
            lds,
            dfss,
            render,
        } => {
            let c = config.resolve()?;
            let sweep = run_sweep(&c, &lds, &dfss)?;
            if render {
                for case in &sweep.cases {
                    render_if(true, case.config.output_dir.as_deref(), &c)?;
                }
            }
            print!("{}", sweep.table_csv());
            print!("{}", sweep.classification_csv());
            if sweep.cases.iter().any(|c| !c.converged) {
                log::warn!("some sweep cases did not reach equilibrium");
            }
        }
        Command::Synth {
            output,
            format,
            nx,
            ny,
            seed,
            noise,
            flat,
        } => {
            let mut spec = SyntheticForeheadSpec::default();
            if flat {
                spec.grooves.clear();
            }
            set_if(&mut spec.seed, seed);
            set_if(&mut spec.noise_amplitude, noise);
            let field = generate_synthetic_forehead(&spec, nx, ny)?;
            save_height_field(&field, &output, format)?;
        }
        Command::Metrics {
            input,
            format,
            config,
            depth_output,
        } => {
            let c = match config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            let field = load_height_field(&input, format)?;
            let map = wrinkle_map_of(&field, &c.smoothing, &c.wrinkles)?;
            if let Some(p) = depth_output {
                save_height_field(&map.depth_field()?, p, FieldFormat::GridCsv)?;
            }
            write_json(&wrinkle_parameters(&map, None)?)?;
        }
        Command::Render { case_dir } => {
            let report = read_case_report(case_dir.join("report.json"))?;
            render_case(&case_dir, &report.config.injury)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
