//! Randomized invariants of every stage.

use std::collections::VecDeque;

use proptest::prelude::*;
use skinstretch::geometry::{
    generate_synthetic_forehead, load_height_field, resample_to_grid, save_height_field, FieldFormat, HeightField,
    SyntheticForeheadSpec,
};
use skinstretch::mesh::{apply_boundary_conditions, discretize, BoundaryTag, LoadProgram, Material};
use skinstretch::solver::{link_tension, step, ConvergenceConfig, Integration, Phase, SolverState};
use skinstretch::stress::{link_stress, stress_from_force};
use skinstretch::surface::{
    clamped_uniform_knots, control_counts, iterate_smooth_fit, BSplineSurface, SmoothingConfig, SupportContour,
};
use skinstretch::wrinkles::{denoise_morphology, label_components, wrinkle_parameters, WrinkleMap};

fn field_strategy() -> impl Strategy<Value = HeightField> {
    (4usize..12, 4usize..12, 0.1f64..2.0, 0.1f64..2.0, -50.0f64..50.0, -50.0f64..50.0).prop_flat_map(
        |(nx, ny, dx, dy, x0, y0)| {
            prop::collection::vec(prop_oneof![9 => (-5.0f64..5.0).prop_map(Some), 1 => Just(None)], nx * ny).prop_map(
                move |z| {
                    let z = z.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
                    HeightField::new(nx, ny, (dx, dy), (x0, y0), z).unwrap()
                },
            )
        },
    )
}

fn random_map(nx: usize, ny: usize, cells: &[(bool, f64)]) -> WrinkleMap {
    let binary: Vec<bool> = cells.iter().map(|c| c.0).collect();
    let depth = cells.iter().map(|&(b, d)| if b { d } else { 0.0 }).collect();
    WrinkleMap::from_parts((nx, ny), (0.5, 0.5), (0.0, 0.0), binary, depth).unwrap()
}

fn map_strategy(max: usize) -> impl Strategy<Value = WrinkleMap> {
    (2usize..=max, 2usize..=max, 0.05f64..0.8).prop_flat_map(|(nx, ny, density)| {
        prop::collection::vec((prop::bool::weighted(density), 0.01f64..1.0), nx * ny)
            .prop_map(move |cells| random_map(nx, ny, &cells))
    })
}

fn flood_fill_count(binary: &[bool], nx: usize, ny: usize) -> usize {
    let mut seen = vec![false; binary.len()];
    let mut count = 0;
    for s in 0..binary.len() {
        if !binary[s] || seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(k) = q.pop_front() {
            let (i, j) = ((k % nx) as isize, (k / nx) as isize);
            for (di, dj) in (-1..=1).flat_map(|a| (-1..=1).map(move |b| (a, b))) {
                let (a, b) = (i + di, j + dj);
                if a >= 0 && b >= 0 && (a as usize) < nx && (b as usize) < ny {
                    let n = b as usize * nx + a as usize;
                    if binary[n] && !seen[n] {
                        seen[n] = true;
                        q.push_back(n);
                    }
                }
            }
        }
    }
    count
}

proptest! {
    #[test]
    fn grid_csv_round_trip(field in field_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        save_height_field(&field, &path, FieldFormat::GridCsv).unwrap();
        let back = load_height_field(&path, FieldFormat::GridCsv).unwrap();
        prop_assert_eq!((back.nx(), back.ny()), (field.nx(), field.ny()));
        prop_assert_eq!((back.dx(), back.dy(), back.origin()), (field.dx(), field.dy(), field.origin()));
        prop_assert_eq!(back.mask(), field.mask());
        for (a, b) in back.z().iter().zip(field.z()).filter(|(a, _)| a.is_finite()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn xyz_round_trip(nx in 4usize..10, ny in 4usize..10, dx in 0.2f64..2.0, seed in any::<u64>()) {
        let field = HeightField::from_fn(nx, ny, (dx, dx), (1.0, -2.0), |x, y| ((seed % 97) as f64 * 0.01 + x * 0.3 - y * 0.1).sin()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.xyz");
        save_height_field(&field, &path, FieldFormat::XyzPoints).unwrap();
        let back = load_height_field(&path, FieldFormat::XyzPoints).unwrap();
        prop_assert_eq!((back.nx(), back.ny()), (nx, ny));
        prop_assert!((back.dx() - dx).abs() <= 1e-9 && (back.dy() - dx).abs() <= 1e-9);
        for (a, b) in back.z().iter().zip(field.z()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn resampling_matches_nearest_node_binning(
        pts in prop::collection::vec((0.0f64..10.0, 0.0f64..8.0, -1.0f64..1.0), 40..200),
        dx in 0.5f64..2.0,
    ) {
        let mut points: Vec<[f64; 3]> = pts.iter().map(|&(x, y, z)| [x, y, z]).collect();
        points.push([0.0, 0.0, 0.0]);
        points.push([10.0, 8.0, 0.0]);
        let field = resample_to_grid(&points, dx, dx).unwrap();
        let (nx, ny) = (field.nx(), field.ny());
        let mut bins: Vec<Vec<f64>> = vec![Vec::new(); nx * ny];
        for p in &points {
            let nearest = |v: f64, origin: f64, n: usize| {
                (0..n).min_by(|&a, &b| {
                    let da = (v - origin - a as f64 * dx).abs();
                    let db = (v - origin - b as f64 * dx).abs();
                    da.partial_cmp(&db).unwrap()
                }).unwrap()
            };
            let (i, j) = (nearest(p[0], 0.0, nx), nearest(p[1], 0.0, ny));
            bins[j * nx + i].push(p[2]);
        }
        for j in 0..ny {
            for i in 0..nx {
                let b = &bins[j * nx + i];
                match field.get(i, j) {
                    None => prop_assert!(b.is_empty()),
                    Some(z) => {
                        let mean = b.iter().sum::<f64>() / b.len() as f64;
                        prop_assert!((z - mean).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn synthetic_fields_are_reproducible(seed in any::<u64>(), nx in 81usize..130, ny in 61usize..100) {
        let spec = SyntheticForeheadSpec { seed, ..SyntheticForeheadSpec::default() };
        let a = generate_synthetic_forehead(&spec, nx, ny).unwrap();
        let b = generate_synthetic_forehead(&spec, nx, ny).unwrap();
        prop_assert_eq!(a.z().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.z().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn partition_of_unity(nx in 4usize..12, ny in 4usize..12, degree in 1usize..=3, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let s = BSplineSurface::from_greville(
            degree,
            clamped_uniform_knots(nx, degree, -3.0, 7.0),
            clamped_uniform_knots(ny, degree, 1.0, 4.0),
            |x, y| x * y,
        ).unwrap();
        let sum = s.basis_sum(-3.0 + 10.0 * u, 1.0 + 3.0 * v).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn mesh_counts_tags_and_mass(nx in 4usize..15, ny in 4usize..15, h in 0.5f64..2.0, bump in 0.0f64..0.5) {
        let field = HeightField::from_fn(nx, ny, (h, h), (0.0, 0.0), |x, y| bump * (x * 0.4).sin() * (y * 0.3).cos()).unwrap();
        let material = Material::default();
        let mesh = discretize(&field, h, &material).unwrap();
        prop_assert_eq!(mesh.links().len(), nx * (ny - 1) + ny * (nx - 1));
        let width = (nx - 1) as f64 * h;
        let program = LoadProgram { dfs: 0.0, ..LoadProgram::default() };
        prop_assume!(program.validate(width).is_ok());
        let tagged = apply_boundary_conditions(&mesh, &program).unwrap();
        let tags = [BoundaryTag::Interior, BoundaryTag::FixedBottom, BoundaryTag::FixedLateral, BoundaryTag::LoadedTop, BoundaryTag::FreeTop];
        let total: usize = tags.iter().map(|&t| tagged.count_tag(t)).sum();
        prop_assert_eq!(total, nx * ny);
        let rho_t = material.density * material.thickness;
        let patch = rho_t * width * (ny - 1) as f64 * h;
        let strip = rho_t * h * h * (nx + ny - 1) as f64;
        prop_assert!((tagged.total_mass() - patch).abs() <= strip * (1.0 + 1e-12));
    }

    #[test]
    fn stress_from_force_equals_strain_form(e in 1e4f64..1e7, area in 0.1f64..5.0, rest in 0.1f64..3.0, stretch in 1.0001f64..1.5) {
        let len = rest * stretch;
        let via_force = stress_from_force(link_tension(e, area, rest, len), area);
        let direct = link_stress(e, rest, len);
        prop_assert!((via_force - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn wrinkle_report_consistency(map in map_strategy(40)) {
        let r = wrinkle_parameters(&map, None).unwrap();
        prop_assert!(r.p80 <= r.p60);
        let depths: Vec<f64> = map.depth.iter().zip(&map.binary).filter(|(_, &b)| b).map(|(&d, _)| d).collect();
        if depths.is_empty() {
            prop_assert_eq!(r.count, 0);
        } else {
            prop_assert_eq!(r.max_depth, map.depth.iter().copied().fold(0.0, f64::max));
            let mean = depths.iter().sum::<f64>() / depths.len() as f64;
            prop_assert!((r.mean_depth - mean).abs() <= 1e-12);
        }
        prop_assert_eq!(r.count, flood_fill_count(&map.binary, map.nx, map.ny));
    }

    #[test]
    fn denoising_never_adds_cells(map in map_strategy(48), radius in 0usize..3, min_area in 0.0f64..3.0) {
        let cleaned = denoise_morphology(&map, radius, min_area).unwrap();
        prop_assert!(cleaned.true_cells() <= map.true_cells());
        prop_assert!(cleaned.binary.iter().zip(&map.binary).all(|(&c, &m)| !c || m));
        let labels = label_components(&cleaned.binary, cleaned.nx, cleaned.ny);
        prop_assert_eq!(labels.iter().copied().max().unwrap_or(0) as usize, flood_fill_count(&cleaned.binary, cleaned.nx, cleaned.ny));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Loaded particles follow the prescribed motion exactly, free particles
    /// stay on or above the support, and slack links carry nothing.
    #[test]
    fn stepping_invariants(
        n in 6usize..10,
        ld in 0.2f64..1.5,
        dfs in 0.0f64..1.5,
        time_scale in 1.0f64..40.0,
        tilt in -0.2f64..0.2,
    ) {
        let h = 1.0;
        let field = HeightField::from_fn(n, n, (h, h), (0.0, 0.0), |x, _| tilt * x).unwrap();
        let program = LoadProgram { ld, dfs, speed: 0.1, fix_lateral_sides: true };
        let mesh = apply_boundary_conditions(&discretize(&field, h, &Material::default()).unwrap(), &program).unwrap();
        let extent = (-2.0, n as f64 + 2.0, -2.0, n as f64 + 2.0);
        let support = SupportContour::plane(tilt, 0.0, 0.0, extent, h).unwrap();
        let integration = Integration::for_mesh(&mesh, &ConvergenceConfig::default()).unwrap();
        let mut state = SolverState::new(&mesh, &program, integration, time_scale);
        let dir = program.direction();
        for _ in 0..400 {
            state = step(&mesh, &state, &support, &program).unwrap();
            let expected = (program.speed * state.load_clock).min(ld);
            prop_assert_eq!(state.applied, expected);
            for (k, p) in mesh.particles().iter().enumerate() {
                match p.tag {
                    BoundaryTag::LoadedTop => {
                        let d = state.positions[k] - (state.initial[k] + dir * expected);
                        prop_assert!(d.norm() <= 1e-12);
                    }
                    t if t.is_free() => prop_assert!(support.clearance(&state.positions[k]) >= -1e-6),
                    _ => prop_assert_eq!(state.positions[k], state.initial[k]),
                }
            }
            for l in mesh.links() {
                let len = (state.positions[l.b] - state.positions[l.a]).norm();
                if len <= l.rest_length {
                    prop_assert_eq!(link_tension(mesh.material().youngs_modulus, l.area, l.rest_length, len), 0.0);
                }
            }
            if state.phase != Phase::Loading {
                break;
            }
        }
    }

    #[test]
    fn smooth_fit_is_a_fixed_point(seed in any::<u64>()) {
        let spec = SyntheticForeheadSpec { seed, ..SyntheticForeheadSpec::default() };
        let field = generate_synthetic_forehead(&spec, 81, 61).unwrap();
        let config = SmoothingConfig::default();
        let (nxc, nyc) = control_counts(&field, config.control_spacing);
        let fit = iterate_smooth_fit(&field, nxc, nyc, &config).unwrap();
        let smooth = HeightField::from_fn(81, 61, (field.dx(), field.dy()), field.origin(), |x, y| fit.surface.evaluate(x, y).unwrap()).unwrap();
        let again = iterate_smooth_fit(&smooth, nxc, nyc, &SmoothingConfig { max_iterations: 1, ..config }).unwrap();
        // Refitting the fit is the next iterate, so it moves no more than the last step did.
        let last = *fit.rms_trace.last().unwrap();
        prop_assert!(again.rms_trace[0] <= last * (1.0 + 1e-9) + 1e-15);
        if last < config.convergence_tol {
            prop_assert!(again.rms_trace[0] < config.convergence_tol);
        }
    }
}
