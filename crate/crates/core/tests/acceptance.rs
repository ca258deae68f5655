//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skinstretch::geometry::{generate_synthetic_forehead, HeightField, SyntheticForeheadSpec};
use skinstretch::mesh::{apply_boundary_conditions, discretize, Axis, LoadProgram, Material};
use skinstretch::render::render_case;
use skinstretch::solver::{collide_point, default_time_scale, link_tension, run_to_equilibrium, ConvergenceConfig};
use skinstretch::stress::element_stresses;
use skinstretch::surface::{control_counts, fit_penalized_spline, SmoothingConfig, SupportContour};
use skinstretch::sweep::{run_sweep, support_for, InputSource, RunConfig, SweepReport};
use skinstretch::wrinkles::{dilate, erode, label_components, wrinkle_parameters, WrinkleMap, WrinkleReference};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Flat 20 x 20 particle sheet, bottom fixed, sides free, whole top row
/// pulled 1 mm: every y link ends at strain 1/19.
fn criterion_1() -> Outcome {
    let h = 1.0;
    let n = 20;
    let field = HeightField::from_fn(n, n, (h, h), (0.0, 0.0), |_, _| 0.0).unwrap();
    let material = Material::default();
    let program = LoadProgram {
        ld: 1.0,
        dfs: 0.0,
        speed: 0.1,
        fix_lateral_sides: false,
    };
    let mesh = apply_boundary_conditions(&discretize(&field, h, &material).unwrap(), &program).unwrap();
    let support = SupportContour::plane(0.0, 0.0, 0.0, (-2.0, 21.0, -2.0, 21.0), h).unwrap();
    let conv = ConvergenceConfig {
        mean_speed_threshold: 1e-9,
        ke_threshold: 1e-30,
        time_scale: Some(default_time_scale(&program, &ConvergenceConfig::default())),
        ..ConvergenceConfig::default()
    };
    let t0 = Instant::now();
    let (state, trace) = run_to_equilibrium(&mesh, &support, &program, &conv).unwrap();
    let elapsed = t0.elapsed();
    let target = 1.0 / 19.0;
    let mut strain_err: f64 = 0.0;
    for l in mesh.links().iter().filter(|l| l.axis == Axis::Y) {
        let len = (state.positions[l.b] - state.positions[l.a]).norm();
        strain_err = strain_err.max(rel((len - l.rest_length) / l.rest_length, target));
    }
    let sigma = element_stresses(&mesh, &state);
    let e19 = material.youngs_modulus / 19.0;
    let stress_err = sigma.sigma_y.values.iter().map(|&s| rel(s, e19)).fold(0.0, f64::max);
    let pass = trace.converged && strain_err <= 1e-6 && stress_err <= 1e-6 && elapsed <= Duration::from_secs(30);
    outcome(
        pass,
        format!(
            "strain rel err {strain_err:.2e}, sigma_y rel err {stress_err:.2e} (tol 1e-6), {:.1} s (limit 30 s)",
            elapsed.as_secs_f64()
        ),
    )
}

/// Tension-only law over random link states against the closed form.
fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut slack_nonzero, mut worst) = (0, 0.0f64);
    for _ in 0..1000 {
        let e = rng.random_range(1e4..1e7);
        let area = rng.random_range(0.1..5.0);
        let rest = rng.random_range(0.1..3.0);
        let len = rest * rng.random_range(0.5..1.5);
        let f = link_tension(e, area, rest, len);
        if len <= rest {
            if f != 0.0 {
                slack_nonzero += 1;
            }
        } else {
            let expected = e * 1e-6 * area * (len - rest) / rest;
            worst = worst.max(rel(f, expected));
        }
    }
    outcome(
        slack_nonzero == 0 && worst <= 1e-12,
        format!("{slack_nonzero} slack links with force, worst taut rel err {worst:.2e} (tol 1e-12)"),
    )
}

/// Projection onto random tilted planes, plus the clearance recorded by
/// the full runs of the trend sweep.
fn criterion_3(full_runs: &[&SweepReport]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_vn, mut worst_pos) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (a, b, c) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-2.0..2.0));
        let support = SupportContour::plane(a, b, c, (-5.0, 25.0, -5.0, 25.0), 1.0).unwrap();
        let (x, y) = (rng.random_range(2.0..18.0), rng.random_range(2.0..18.0));
        let zp = c + a * x + b * y;
        let mut p = Vector3::new(x, y, zp - rng.random_range(1e-3..0.5));
        let mut v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = Vector3::new(-a, -b, 1.0).normalize();
        let s = n.dot(&(p - Vector3::new(x, y, zp)));
        let expected = p - n * s;
        collide_point(&support, &mut p, &mut v);
        worst_vn = worst_vn.max(v.dot(&n).abs());
        worst_pos = worst_pos.max((p - expected).norm());
    }
    let min_clearance = full_runs
        .iter()
        .flat_map(|s| s.cases.iter())
        .map(|c| c.min_clearance)
        .fold(f64::INFINITY, f64::min);
    outcome(
        worst_vn <= 1e-12 && worst_pos <= 1e-12 && min_clearance >= -1e-6,
        format!(
            "normal velocity {worst_vn:.2e} (tol 1e-12), projection err {worst_pos:.2e} mm, min clearance in full runs {min_clearance:.2e} mm (tol -1e-6)"
        ),
    )
}

/// The default synthetic case from the trend sweep.
fn criterion_4(ld_sweep: &SweepReport) -> Outcome {
    let defaults = RunConfig::default();
    let Some(c) = ld_sweep.case(defaults.load.ld, defaults.load.dfs) else {
        return outcome(false, "default case missing from sweep".into());
    };
    outcome(
        c.converged && c.steps <= c.config.convergence.max_steps && c.relax_ke_growth <= 0.0,
        format!(
            "converged {} after {} steps, worst 100-step relaxing KE growth {:.2e} J",
            c.converged, c.steps, c.relax_ke_growth
        ),
    )
}

/// Bicubic reproduction, partition of unity and smoothing monotonicity.
fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let coef: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let poly = |x: f64, y: f64| {
        let (u, v) = (x / 20.0, y / 15.0);
        (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| coef[4 * i + j] * u.powi(i as i32) * v.powi(j as i32))
            .sum::<f64>()
    };
    let field = HeightField::from_fn(81, 61, (0.25, 0.25), (0.0, 0.0), poly).unwrap();
    let (nxc, nyc) = control_counts(&field, 2.0);
    let exact = SmoothingConfig {
        lambda: 0.0,
        ..SmoothingConfig::default()
    };
    let fit = fit_penalized_spline(&field, nxc, nyc, &exact).unwrap();
    let mut sq = 0.0;
    for (_, _, x, y, z) in field.valid_nodes() {
        sq += (fit.evaluate(x, y).unwrap() - z).powi(2);
    }
    let rms = (sq / field.valid_count() as f64).sqrt();

    let (x0, x1, y0, y1) = fit.domain();
    let mut pou: f64 = 0.0;
    for _ in 0..1000 {
        let (x, y) = (rng.random_range(x0..x1), rng.random_range(y0..y1));
        pou = pou.max((fit.basis_sum(x, y).unwrap() - 1.0).abs());
    }

    let wrinkled = generate_synthetic_forehead(&SyntheticForeheadSpec::default(), 81, 61).unwrap();
    let (nxc, nyc) = control_counts(&wrinkled, 2.0);
    let energies: Vec<f64> = [0.0, 0.1, 1.0, 10.0]
        .iter()
        .map(|&lambda| {
            let c = SmoothingConfig {
                lambda,
                ..SmoothingConfig::default()
            };
            fit_penalized_spline(&wrinkled, nxc, nyc, &c).unwrap().curvature_energy()
        })
        .collect();
    let monotone = energies.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        rms <= 1e-6 && pou <= 1e-12 && monotone,
        format!("bicubic RMS {rms:.2e} mm (tol 1e-6), partition of unity err {pou:.2e} (tol 1e-12), energies {energies:.4?}"),
    )
}

/// Support below the skin on random foreheads, offset equal to the
/// brute-force maximum.
fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_excess, mut offset_mismatch) = (f64::NEG_INFINITY, 0);
    for _ in 0..20 {
        let mut spec = SyntheticForeheadSpec {
            seed: rng.random(),
            noise_amplitude: rng.random_range(0.0..0.05),
            ..SyntheticForeheadSpec::default()
        };
        for g in &mut spec.grooves {
            g.depth = rng.random_range(0.2..1.0);
            g.half_width = rng.random_range(1.0..2.0);
        }
        let (nx, ny) = (rng.random_range(81..161), rng.random_range(61..121));
        let field = generate_synthetic_forehead(&spec, nx, ny).unwrap();
        let config = RunConfig {
            input: InputSource::Synthetic { nx, ny, spec },
            ..RunConfig::default()
        };
        let support = support_for(&field, &config).unwrap();
        let zs = support.smooth_surface();
        let mut brute: f64 = 0.0;
        for (_, _, x, y, z) in field.valid_nodes() {
            brute = brute.max(zs.evaluate(x, y).unwrap() - z);
            worst_excess = worst_excess.max(support.height(x, y).unwrap() - z);
        }
        if brute != support.offset() {
            offset_mismatch += 1;
        }
    }
    outcome(
        worst_excess <= 1e-9 && offset_mismatch == 0,
        format!("max Z_sup - Z_c {worst_excess:.2e} mm (tol 1e-9), {offset_mismatch} offset mismatches"),
    )
}

fn flood_fill_components(binary: &[bool], nx: usize, ny: usize) -> Vec<usize> {
    let mut seen = vec![false; binary.len()];
    let mut sizes = Vec::new();
    for start in 0..binary.len() {
        if !binary[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut size = 0;
        while let Some(k) = queue.pop_front() {
            size += 1;
            let (i, j) = ((k % nx) as isize, (k / nx) as isize);
            for dj in -1..=1 {
                for di in -1..=1 {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= nx as isize || b >= ny as isize {
                        continue;
                    }
                    let q = b as usize * nx + a as usize;
                    if binary[q] && !seen[q] {
                        seen[q] = true;
                        queue.push_back(q);
                    }
                }
            }
        }
        sizes.push(size);
    }
    sizes
}

fn brute_opening(binary: &[bool], nx: usize, ny: usize, r: usize) -> Vec<bool> {
    let r = r as isize;
    let at = |b: &[bool], i: isize, j: isize| i >= 0 && j >= 0 && i < nx as isize && j < ny as isize && b[j as usize * nx + i as usize];
    let window = |b: &[bool], i: usize, j: usize, all: bool| {
        let mut cells = (-r..=r).flat_map(|dj| (-r..=r).map(move |di| (di, dj)));
        if all {
            cells.all(|(di, dj)| at(b, i as isize + di, j as isize + dj))
        } else {
            cells.any(|(di, dj)| at(b, i as isize + di, j as isize + dj))
        }
    };
    let grid = |f: &dyn Fn(usize, usize) -> bool| -> Vec<bool> { (0..ny).flat_map(|j| (0..nx).map(move |i| (i, j))).map(|(i, j)| f(i, j)).collect() };
    let eroded = grid(&|i, j| window(binary, i, j, true));
    grid(&|i, j| window(&eroded, i, j, false))
}

/// Report fields and labels against brute force on random maps, and the
/// opening against a direct window oracle.
fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    for trial in 0..50 {
        let (nx, ny) = (64, 64);
        let density = rng.random_range(0.05..0.6);
        let binary: Vec<bool> = (0..nx * ny).map(|_| rng.random_bool(density)).collect();
        let depth: Vec<f64> = binary.iter().map(|&b| if b { rng.random_range(0.01..1.0) } else { 0.0 }).collect();
        let map = WrinkleMap::from_parts((nx, ny), (0.25, 0.25), (0.0, 0.0), binary.clone(), depth.clone()).unwrap();
        let reference = WrinkleReference {
            max_depth: rng.random_range(0.3..1.2),
            mean_depth: rng.random_range(0.1..0.6),
        };
        let report = wrinkle_parameters(&map, Some(reference)).unwrap();
        let cells = binary.iter().filter(|&&b| b).count();
        let deeper = |limit: f64| depth.iter().zip(&binary).filter(|(&d, &b)| b && d > limit).count();
        let sizes = flood_fill_components(&binary, nx, ny);
        let labels = label_components(&binary, nx, ny);
        let label_count = labels.iter().copied().max().unwrap_or(0) as usize;
        let expected = (
            sizes.len(),
            deeper(0.6 * reference.max_depth) as f64 / cells as f64,
            deeper(0.8 * reference.max_depth) as f64 / cells as f64,
            deeper(reference.mean_depth) as f64 * 0.0625,
            cells as f64 * 0.0625,
        );
        let got = (report.count, report.p60, report.p80, report.a_m, report.area);
        if got != expected || label_count != sizes.len() || report.p80 > report.p60 {
            failures.push(format!("map {trial}: {got:?} vs {expected:?}"));
        }
    }
    for trial in 0..50 {
        let (nx, ny) = (rng.random_range(1..=32), rng.random_range(1..=32));
        let r = rng.random_range(0..=3);
        let binary: Vec<bool> = (0..nx * ny).map(|_| rng.random_bool(0.7)).collect();
        let fast = dilate(&erode(&binary, nx, ny, r), nx, ny, r);
        if fast != brute_opening(&binary, nx, ny, r) {
            failures.push(format!("opening {trial} ({nx}x{ny}, r {r})"));
        }
    }
    let detail = if failures.is_empty() {
        "50 random 64x64 maps and 50 opening blocks match brute force exactly".to_string()
    } else {
        format!("{} mismatches, first: {}", failures.len(), failures[0])
    };
    outcome(failures.is_empty(), detail)
}

const SMALL_DFS: f64 = 5.69;
const MID_DFS: f64 = 7.58;
const LARGE_DFS: f64 = 15.16;

fn trend_config() -> RunConfig {
    RunConfig {
        parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..RunConfig::default()
    }
}

fn criterion_8(ld_sweep: &SweepReport, dfs_sweep: &SweepReport, elapsed: Duration) -> Outcome {
    let by_ld: Vec<_> = [2.0, 3.0, 4.0].iter().map(|&ld| ld_sweep.case(ld, MID_DFS).unwrap()).collect();
    let area: Vec<f64> = by_ld.iter().map(|c| c.residual.area).collect();
    let a_m: Vec<f64> = by_ld.iter().map(|c| c.residual.a_m).collect();
    let sigma_y: Vec<f64> = by_ld.iter().map(|c| c.stress.max_sigma_y).collect();
    let nonincreasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    let nondecreasing = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0]);
    let mid_area = ld_sweep.case(3.0, MID_DFS).unwrap().residual.area;
    let dfs_area: Vec<f64> = [SMALL_DFS, LARGE_DFS]
        .iter()
        .map(|&d| dfs_sweep.case(3.0, d).unwrap().residual.area)
        .collect();
    let converged = ld_sweep.cases.iter().chain(&dfs_sweep.cases).all(|c| c.converged);
    let pass = converged
        && nonincreasing(&area)
        && nonincreasing(&a_m)
        && nondecreasing(&sigma_y)
        && dfs_area[1] > mid_area
        && elapsed <= Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "L_d 2/3/4: area {area:.4?}, A_m {a_m:.4?}, max sigma_y {sigma_y:.0?} Pa; d_fs {SMALL_DFS}/{MID_DFS}/{LARGE_DFS} area {:.4}/{mid_area:.4}/{:.4}; all converged {converged}; {:.0} s (limit 600 s)",
            dfs_area[0],
            dfs_area[1],
            elapsed.as_secs_f64()
        ),
    )
}

fn sorted_artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "png")) {
                let name = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((name, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// The same sweep run twice yields byte-identical CSV files and images.
fn criterion_9() -> Outcome {
    let base = RunConfig {
        input: InputSource::Synthetic {
            nx: 81,
            ny: 61,
            spec: SyntheticForeheadSpec::default(),
        },
        mesh_spacing: 2.0,
        residual_spacing: 0.5,
        parallelism: 2,
        load: LoadProgram {
            speed: 1.0,
            ..LoadProgram::default()
        },
        ..RunConfig::default()
    };
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let config = RunConfig {
                output_dir: Some(dir.path().to_path_buf()),
                ..base.clone()
            };
            let sweep = run_sweep(&config, &[2.0, 3.0], &[MID_DFS]).unwrap();
            for c in &sweep.cases {
                render_case(c.config.output_dir.as_ref().unwrap(), &config.injury).unwrap();
            }
            let files = sorted_artifacts(dir.path());
            (dir, files)
        })
        .collect();
    let (a, b) = (&runs[0].1, &runs[1].1);
    let pngs = a.iter().filter(|(n, _)| n.ends_with(".png")).count();
    let identical = a == b && pngs == 6;
    outcome(
        identical,
        format!("{} CSV and PNG files ({pngs} images) compared byte for byte: identical {}", a.len(), a == b),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut report = |id: u32, o: Outcome| {
        // Written to the raw handle so the verdicts show even when output is captured.
        let line = format!("criterion {id}: {} - {}\n", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        let _ = std::io::stderr().write_all(line.as_bytes());
        results.push((id, o));
    };
    report(1, criterion_1());
    report(2, criterion_2());

    let base = trend_config();
    let t0 = Instant::now();
    let ld_sweep = run_sweep(&base, &[2.0, 3.0, 4.0], &[MID_DFS]).unwrap();
    let dfs_sweep = run_sweep(&base, &[3.0], &[SMALL_DFS, LARGE_DFS]).unwrap();
    let elapsed = t0.elapsed();

    report(3, criterion_3(&[&ld_sweep, &dfs_sweep]));
    report(4, criterion_4(&ld_sweep));
    report(5, criterion_5());
    report(6, criterion_6());
    report(7, criterion_7());
    report(8, criterion_8(&ld_sweep, &dfs_sweep, elapsed));
    report(9, criterion_9());

    let failed: Vec<u32> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
