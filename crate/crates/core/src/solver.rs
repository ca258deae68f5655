//! Explicit damped particle dynamics for the tension-only membrane.
//!
//! Units: positions in mm, velocities in mm/s, forces in N, masses in kg,
//! time in s. Accelerations are therefore `1000 * F / m` in mm/s^2.

use std::fmt::Write as _;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, LoadProgram, ParticleMesh, PA_TO_N_PER_MM2};
use crate::surface::SupportContour;

/// Fraction of the critical step `sqrt(m / k_max)` used by default.
pub const DT_SAFETY: f64 = 0.2;
/// Mass for which 1e-12 J of kinetic energy means a 0.01 mm/s mean speed.
pub const REFERENCE_MASS: f64 = 2.0 * 1e-12 / (1e-5 * 1e-5);
/// Loading KE may not exceed this multiple of the stopping threshold.
pub const LOADING_KE_FACTOR: f64 = 1e3;
const KE_GUARD_INTERVAL: u64 = 100;
/// Steps of low loading KE before the loading clock is sped up again.
const CALM_STEPS: u64 = 5000;
const MAX_COLLISION_PASSES: usize = 4;
/// Rounding left by a projection onto an element plane (mm).
const PROJECTION_SLACK: f64 = 1e-12;
const MM_PER_S_TO_M_PER_S: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Stopping threshold on kinetic energy (J) for a 0.02 kg moving mass;
    /// rescaled by moving mass.
    pub ke_threshold: f64,
    /// Stopping threshold on the mean particle speed (mm/s).
    pub mean_speed_threshold: f64,
    pub max_steps: u64,
    pub trace_every: u64,
    /// Time step override (s).
    pub dt: Option<f64>,
    /// Damping coefficient override (1/s).
    pub alpha: Option<f64>,
    /// Loading-time compression. When unset a default is chosen and halved
    /// whenever the loading kinetic energy grows too large; a set value is
    /// used as given.
    pub time_scale: Option<f64>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            ke_threshold: 1e-12,
            mean_speed_threshold: 0.01,
            max_steps: 8_000_000,
            trace_every: 1000,
            dt: None,
            alpha: None,
            time_scale: None,
        }
    }
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ke_threshold > 0.0) || !(self.mean_speed_threshold > 0.0) {
            return Err(Error::Validation("convergence thresholds must be positive".into()));
        }
        if self.max_steps == 0 || self.trace_every == 0 {
            return Err(Error::Validation("max_steps and trace_every must be at least 1".into()));
        }
        for (name, v) in [("dt", self.dt), ("alpha", self.alpha), ("time_scale", self.time_scale)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Validation(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(s) = self.time_scale {
            if s < 1.0 {
                return Err(Error::Validation(format!("time_scale must be >= 1, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Loading,
    Relaxing,
    Converged,
}

/// Time step and damping of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integration {
    pub dt: f64,
    pub alpha: f64,
    /// Highest single-link angular frequency `sqrt(k_max / m)` (rad/s).
    pub omega: f64,
}

impl Integration {
    pub fn for_mesh(mesh: &ParticleMesh, conv: &ConvergenceConfig) -> Result<Self> {
        let k_max = mesh
            .links()
            .iter()
            .map(|l| mesh.link_stiffness(l))
            .fold(0.0, f64::max);
        let m_min = mesh.particles().iter().map(|p| p.mass).fold(f64::INFINITY, f64::min);
        let omega = (k_max * 1e3 / m_min).sqrt();
        let dt = conv.dt.unwrap_or(DT_SAFETY / omega);
        if dt * omega > 1.0 {
            return Err(Error::Validation(format!(
                "dt = {dt} s exceeds the stability limit {} s",
                1.0 / omega
            )));
        }
        // The position update uses the acceleration of the old step in both
        // halves, which is only stable with alpha > omega_max^2 dt / 2
        // (omega_max = 2 omega for a chain).
        let floor = 4.0 * omega * omega * dt;
        let n_side = mesh.nx().max(mesh.ny()) as f64;
        let alpha = conv.alpha.unwrap_or((2.0 * omega / n_side).max(1.25 * floor));
        if alpha < floor {
            return Err(Error::Validation(format!(
                "alpha = {alpha} 1/s is below the stability floor {floor} 1/s for dt = {dt} s"
            )));
        }
        Ok(Self { dt, alpha, omega })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub positions: Vec<Vector3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
    /// Internal force at the start of the last step (N).
    pub forces: Vec<Vector3<f64>>,
    pub initial: Vec<Vector3<f64>>,
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub alpha: f64,
    /// Rate of the loading clock relative to `t`.
    pub time_scale: f64,
    /// Program time of the stretching line (s); advances by
    /// `time_scale * dt` per step.
    pub load_clock: f64,
    /// Displacement of the stretching line completed so far (mm).
    pub applied: f64,
    pub phase: Phase,
}

impl SolverState {
    pub fn new(mesh: &ParticleMesh, program: &LoadProgram, integration: Integration, time_scale: f64) -> Self {
        let initial: Vec<_> = mesh.particles().iter().map(|p| p.position).collect();
        let n = initial.len();
        let mut s = Self {
            positions: initial.clone(),
            velocities: vec![Vector3::zeros(); n],
            forces: vec![Vector3::zeros(); n],
            initial,
            step: 0,
            t: 0.0,
            dt: integration.dt,
            alpha: integration.alpha,
            time_scale,
            load_clock: 0.0,
            applied: 0.0,
            phase: Phase::Loading,
        };
        s.update_phase(program);
        s
    }

    /// Speed of the stretching line in simulated time (mm/s).
    pub fn loading_speed(&self, program: &LoadProgram) -> f64 {
        program.speed * self.time_scale
    }

    /// `min(speed * clock, L_d)`: the stretching-line displacement.
    pub fn prescribed_displacement(&self, program: &LoadProgram) -> f64 {
        (program.speed * self.load_clock).min(program.ld)
    }

    fn update_phase(&mut self, program: &LoadProgram) {
        self.applied = self.prescribed_displacement(program);
        if self.phase == Phase::Loading && program.speed * self.load_clock >= program.ld {
            self.phase = Phase::Relaxing;
        }
    }

    pub fn max_displacement(&self) -> f64 {
        self.positions
            .iter()
            .zip(&self.initial)
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
struct LinkK {
    a: usize,
    b: usize,
    rest: f64,
    /// N/mm
    k: f64,
}

fn link_table(mesh: &ParticleMesh) -> Vec<LinkK> {
    mesh.links()
        .iter()
        .map(|l| LinkK {
            a: l.a,
            b: l.b,
            rest: l.rest_length,
            k: mesh.link_stiffness(l),
        })
        .collect()
}

/// Magnitude (N) of the tension carried by a link of the given lengths.
#[inline]
pub fn link_tension(youngs_modulus: f64, area: f64, rest_length: f64, length: f64) -> f64 {
    let du = length - rest_length;
    if du > 0.0 {
        youngs_modulus * PA_TO_N_PER_MM2 * area * du / rest_length
    } else {
        0.0
    }
}

fn accumulate_forces(links: &[LinkK], x: &[Vector3<f64>], out: &mut [Vector3<f64>]) -> Result<()> {
    out.iter_mut().for_each(|f| *f = Vector3::zeros());
    for (idx, l) in links.iter().enumerate() {
        let d = x[l.b] - x[l.a];
        let len = d.norm();
        if !(len > 0.0) {
            return Err(Error::DegenerateGeometry {
                link: idx,
                a: l.a,
                b: l.b,
            });
        }
        let du = len - l.rest;
        if du > 0.0 {
            let f = d * (l.k * du / len);
            out[l.a] += f;
            out[l.b] -= f;
        }
    }
    Ok(())
}

/// Net link force on every particle at the state's positions (N).
pub fn internal_forces(mesh: &ParticleMesh, state: &SolverState) -> Result<Vec<Vector3<f64>>> {
    let mut out = vec![Vector3::zeros(); state.positions.len()];
    accumulate_forces(&link_table(mesh), &state.positions, &mut out)?;
    Ok(out)
}

/// Perfectly inelastic contact of one particle with the support: a point
/// below its element is projected onto the element plane and loses its
/// normal velocity. Returns whether contact occurred.
pub fn collide_point(support: &SupportContour, b: &mut Vector3<f64>, v: &mut Vector3<f64>) -> bool {
    contact(support, b, v).0
}

/// Contact resolution; also returns the vertical gap left under the
/// particle (zero after a contact).
#[inline]
fn contact(support: &SupportContour, b: &mut Vector3<f64>, v: &mut Vector3<f64>) -> (bool, f64) {
    let mut e = support.element_plane(b.x, b.y);
    let mut s = e.signed_distance(b);
    if s >= 0.0 {
        return (false, s / e.normal.z);
    }
    for _ in 0..MAX_COLLISION_PASSES {
        if e.clamped {
            log::debug!("particle at ({}, {}) is outside the support cache", b.x, b.y);
        }
        *b -= e.normal * s;
        *v -= e.normal * v.dot(&e.normal);
        e = support.element_plane(b.x, b.y);
        s = e.signed_distance(b);
        if s >= -PROJECTION_SLACK {
            return (true, 0.0);
        }
    }
    // Projection cycled between neighbouring elements; settle vertically.
    b.z = support.element_height(b.x, b.y);
    *v -= e.normal * v.dot(&e.normal);
    (true, 0.0)
}

/// Applies contact to every particle that moves under the dynamics.
pub fn collide(mesh: &ParticleMesh, state: &SolverState, support: &SupportContour) -> SolverState {
    let mut out = state.clone();
    for (k, p) in mesh.particles().iter().enumerate() {
        if p.tag.is_free() {
            let (mut b, mut v) = (out.positions[k], out.velocities[k]);
            collide_point(support, &mut b, &mut v);
            out.positions[k] = b;
            out.velocities[k] = v;
        }
    }
    out
}

/// Total kinetic energy of the non-fixed particles (J).
pub fn kinetic_energy(mesh: &ParticleMesh, state: &SolverState) -> f64 {
    mesh.particles()
        .iter()
        .zip(&state.velocities)
        .filter(|(p, _)| !p.tag.is_fixed())
        .map(|(p, v)| 0.5 * p.mass * (v.norm() * MM_PER_S_TO_M_PER_S).powi(2))
        .sum()
}

/// KE stopping threshold scaled from the reference mass to this mesh.
pub fn scaled_ke_threshold(mesh: &ParticleMesh, conv: &ConvergenceConfig) -> f64 {
    let moving: f64 = mesh.particles().iter().filter(|p| !p.tag.is_fixed()).map(|p| p.mass).sum();
    conv.ke_threshold * moving / REFERENCE_MASS
}

/// Stepping kernel with the per-run tables precomputed.
struct Stepper<'a> {
    mesh: &'a ParticleMesh,
    support: &'a SupportContour,
    program: &'a LoadProgram,
    links: Vec<LinkK>,
    free: Vec<usize>,
    loaded: Vec<usize>,
    fixed: Vec<usize>,
    /// mm/s^2 per N, per particle.
    inv_mass: Vec<f64>,
    /// Lower bound on each free particle's vertical gap above the support;
    /// contact is only tested once it is used up.
    gap: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(mesh: &'a ParticleMesh, support: &'a SupportContour, program: &'a LoadProgram) -> Self {
        let mut free = Vec::new();
        let mut loaded = Vec::new();
        let mut fixed = Vec::new();
        for (k, p) in mesh.particles().iter().enumerate() {
            match p.tag {
                BoundaryTag::Interior | BoundaryTag::FreeTop => free.push(k),
                BoundaryTag::LoadedTop => loaded.push(k),
                BoundaryTag::FixedBottom | BoundaryTag::FixedLateral => fixed.push(k),
            }
        }
        Self {
            mesh,
            support,
            program,
            links: link_table(mesh),
            gap: vec![0.0; free.len()],
            free,
            loaded,
            fixed,
            inv_mass: mesh.particles().iter().map(|p| 1e3 / p.mass).collect(),
        }
    }

    fn step(&mut self, s: &mut SolverState) -> Result<()> {
        accumulate_forces(&self.links, &s.positions, &mut s.forces)?;
        let dt = s.dt;
        let half_dt2 = if s.step == 0 { 0.0 } else { 0.5 * dt * dt };
        let slope = self.support.max_slope();
        for (slot, &k) in self.free.iter().enumerate() {
            let v = s.velocities[k];
            let f = s.forces[k];
            let a = f * self.inv_mass[k] - v * s.alpha;
            let x0 = s.positions[k];
            let mut x = x0 + v * dt + a * half_dt2;
            let mut v1 = v + a * dt;
            if !(x.sum() + f.sum()).is_finite() {
                return Err(Error::Divergence {
                    step: s.step,
                    particle: k,
                });
            }
            let d = x - x0;
            let gap = &mut self.gap[slot];
            *gap -= d.z.abs() + slope * (d.x.abs() + d.y.abs());
            if *gap <= 0.0 {
                *gap = contact(self.support, &mut x, &mut v1).1;
            }
            s.positions[k] = x;
            s.velocities[k] = v1;
        }
        s.step += 1;
        s.t = s.step as f64 * dt;
        let was_loading = s.phase == Phase::Loading;
        if was_loading {
            s.load_clock += s.time_scale * dt;
        }
        s.update_phase(self.program);
        let dir = self.program.direction();
        let v_load = if was_loading && s.phase == Phase::Loading {
            dir * s.loading_speed(self.program)
        } else {
            Vector3::zeros()
        };
        for &k in &self.loaded {
            s.positions[k] = s.initial[k] + dir * s.applied;
            s.velocities[k] = v_load;
        }
        for &k in &self.fixed {
            s.positions[k] = s.initial[k];
            s.velocities[k] = Vector3::zeros();
        }
        Ok(())
    }

    fn mean_speed(&self, s: &SolverState) -> f64 {
        if self.free.is_empty() {
            return 0.0;
        }
        self.free.iter().map(|&k| s.velocities[k].norm()).sum::<f64>() / self.free.len() as f64
    }

    fn min_clearance(&self, s: &SolverState) -> f64 {
        self.free
            .iter()
            .map(|&k| self.support.clearance(&s.positions[k]))
            .fold(f64::INFINITY, f64::min)
    }

    fn row(&self, s: &SolverState) -> TraceRow {
        TraceRow {
            step: s.step,
            t: s.t,
            ke: kinetic_energy(self.mesh, s),
            mean_speed: self.mean_speed(s),
            max_disp: s.max_displacement(),
            min_clearance: self.min_clearance(s),
        }
    }
}

/// One iteration of the damped explicit update followed by contact and
/// prescribed boundary motion.
pub fn step(mesh: &ParticleMesh, state: &SolverState, support: &SupportContour, program: &LoadProgram) -> Result<SolverState> {
    let mut s = state.clone();
    Stepper::new(mesh, support, program).step(&mut s)?;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: u64,
    pub t: f64,
    pub ke: f64,
    pub mean_speed: f64,
    pub max_disp: f64,
    /// Smallest normal clearance of a free particle above the support (mm).
    pub min_clearance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
    /// Kinetic energy after every step of the relaxing phase.
    pub relax_ke: Vec<f64>,
    /// Kinetic energy when loading finished.
    pub loading_end_ke: f64,
    pub ke_threshold_scaled: f64,
    /// Time scale at the start of loading.
    pub time_scale: f64,
    /// Slowest time scale used while loading.
    pub min_time_scale: f64,
    /// Number of loading slow-downs forced by the kinetic-energy guard.
    pub slowdowns: u32,
    pub converged: bool,
}

impl ConvergenceTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,t,ke,mean_speed,max_disp\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.step, r.t, r.ke, r.mean_speed, r.max_disp);
        }
        s
    }

    pub fn final_row(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn min_clearance(&self) -> f64 {
        self.rows.iter().map(|r| r.min_clearance).fold(f64::INFINITY, f64::min)
    }

    /// Largest growth of relaxing-phase KE over any `window` steps; zero or
    /// negative when the tail is nonincreasing at that scale.
    pub fn worst_window_growth(&self, window: usize) -> f64 {
        self.relax_ke
            .windows(window + 1)
            .map(|w| w[window] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NonConvergence {
                message: format!(
                    "no equilibrium after {} steps",
                    self.rows.last().map_or(0, |r| r.step)
                ),
                trace: self.rows.iter().map(|r| r.mean_speed).collect(),
            })
        }
    }
}

/// Loads the stretching line and relaxes until the mean speed or the scaled
/// kinetic energy drops below threshold. A run that exhausts `max_steps`
/// returns its last state with `converged == false`.
pub fn run_to_equilibrium(
    mesh: &ParticleMesh,
    support: &SupportContour,
    program: &LoadProgram,
    conv: &ConvergenceConfig,
) -> Result<(SolverState, ConvergenceTrace)> {
    run_to_equilibrium_with(mesh, support, program, conv, |_| {})
}

/// Loading speed chosen so that a uniform velocity gradient over the patch
/// stays well inside the loading KE guard.
pub fn default_time_scale(program: &LoadProgram, conv: &ConvergenceConfig) -> f64 {
    // RMS speed (mm/s) at which the guard trips.
    let guard_speed = (2.0 * LOADING_KE_FACTOR * conv.ke_threshold / REFERENCE_MASS).sqrt() / MM_PER_S_TO_M_PER_S;
    (0.5 * 3f64.sqrt() * guard_speed / program.speed).max(1.0)
}

/// As [`run_to_equilibrium`], calling `observe` after every step.
///
/// With `time_scale` unset the loading clock is governed by the kinetic
/// energy: it is halved whenever the energy passes a quarter of the
/// loading guard and doubled (up to four times the default) after a calm
/// period below a sixteenth of it.
pub fn run_to_equilibrium_with(
    mesh: &ParticleMesh,
    support: &SupportContour,
    program: &LoadProgram,
    conv: &ConvergenceConfig,
    mut observe: impl FnMut(&SolverState),
) -> Result<(SolverState, ConvergenceTrace)> {
    conv.validate()?;
    program.validate(mesh.width())?;
    let integration = Integration::for_mesh(mesh, conv)?;
    let mut stepper = Stepper::new(mesh, support, program);
    let ke_stop = scaled_ke_threshold(mesh, conv);
    let ke_guard = LOADING_KE_FACTOR * ke_stop;
    let governed = conv.time_scale.is_none();
    let base_scale = conv.time_scale.unwrap_or_else(|| default_time_scale(program, conv));
    let max_scale = 4.0 * base_scale;

    let mut s = SolverState::new(mesh, program, integration, base_scale);
    let mut trace = ConvergenceTrace {
        ke_threshold_scaled: ke_stop,
        time_scale: base_scale,
        min_time_scale: base_scale,
        ..ConvergenceTrace::default()
    };
    trace.rows.push(stepper.row(&s));
    let mut calm_since = 0;
    let mut warned = false;
    loop {
        if s.phase == Phase::Relaxing {
            let ke = kinetic_energy(mesh, &s);
            if trace.relax_ke.is_empty() {
                trace.loading_end_ke = ke;
            }
            trace.relax_ke.push(ke);
            if ke < ke_stop || stepper.mean_speed(&s) < conv.mean_speed_threshold {
                s.phase = Phase::Converged;
                trace.converged = true;
                break;
            }
        }
        if s.step >= conv.max_steps {
            log::warn!("stopped after {} steps without reaching equilibrium", s.step);
            break;
        }
        stepper.step(&mut s)?;
        observe(&s);
        if s.phase == Phase::Loading && s.step % KE_GUARD_INTERVAL == 0 {
            let ke = kinetic_energy(mesh, &s);
            if ke > ke_guard && s.time_scale <= 1.0 && !warned {
                log::warn!("loading kinetic energy {ke:e} J exceeds the guard {ke_guard:e} J at real-time loading");
                warned = true;
            }
            if governed {
                if ke > 0.25 * ke_guard && s.time_scale > 1.0 {
                    s.time_scale = (s.time_scale / 2.0).max(1.0);
                    trace.min_time_scale = trace.min_time_scale.min(s.time_scale);
                    trace.slowdowns += 1;
                    calm_since = s.step;
                } else if ke > ke_guard / 16.0 {
                    calm_since = s.step;
                } else if s.step - calm_since >= CALM_STEPS && s.time_scale < max_scale {
                    s.time_scale = (s.time_scale * 2.0).min(max_scale);
                    calm_since = s.step;
                }
            }
        }
        if s.step % conv.trace_every == 0 {
            trace.rows.push(stepper.row(&s));
        }
    }
    if trace.rows.last().map(|r| r.step) != Some(s.step) {
        trace.rows.push(stepper.row(&s));
    }
    Ok((s, trace))
}
