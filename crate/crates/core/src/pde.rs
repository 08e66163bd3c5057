//! Radial system evolved in similarity coordinates.
//!
//! With `y = r/t`, `tau = ln t`, `rho_hat = t^2 rho` and `u_hat = u`, the
//! radial equations become autonomous in `tau` and a self-similar profile is
//! a steady state. The scheme works on `m = y^2 rho_hat` and `q = m u_hat`:
//!
//! ```text
//! m_tau + (m c)_y = -m
//! q_tau + (q c)_y = -q - A y^2 rho_y
//!                   + 2 y^2 [ (rho u_y)_y + 2 rho (u_y/y - u/y^2) ] - G rho
//! c = u_hat - y,   G(y) = G_core + int_{y_min}^{y} a^2 rho_hat da
//! ```
//!
//! Convection is first-order upwind at cell midpoints, the remaining terms
//! are centred, and time stepping is forward Euler. Both end nodes hold
//! their initial values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::selfsim::{gravity_similarity, PressureFlag};
use crate::trace::SolutionTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    DirichletFromProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdeConfig {
    /// Number of grid nodes.
    pub cells: usize,
    pub cfl: f64,
    pub tau_end: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub bc_inner: BoundaryPolicy,
    pub bc_outer: BoundaryPolicy,
    /// Spacing in `tau` between recorded deviations.
    pub record_every: f64,
    pub execution: Execution,
}

impl Default for PdeConfig {
    fn default() -> Self {
        PdeConfig {
            cells: 400,
            cfl: 0.4,
            tau_end: 1.0,
            y_min: 0.05,
            y_max: 5.0,
            bc_inner: BoundaryPolicy::DirichletFromProfile,
            bc_outer: BoundaryPolicy::DirichletFromProfile,
            record_every: 0.05,
            execution: Execution::Parallel,
        }
    }
}

impl PdeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells < 16 {
            return Err(Error::InvalidInput(format!("cells must be >= 16, got {}", self.cells)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return Err(Error::InvalidInput(format!("cfl must lie in (0, 0.9], got {}", self.cfl)));
        }
        if !(self.tau_end >= 0.0 && self.tau_end.is_finite()) {
            return Err(Error::InvalidInput(format!("tau_end must be non-negative, got {}", self.tau_end)));
        }
        if !(self.y_min > 0.0 && self.y_max > self.y_min) {
            return Err(Error::InvalidInput(format!("need 0 < y_min < y_max, got [{}, {}]", self.y_min, self.y_max)));
        }
        if !(self.record_every > 0.0) {
            return Err(Error::InvalidInput("record_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialField {
    pub grid: Vec<f64>,
    pub rho_hat: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub tau: f64,
    pub pressure: PressureFlag,
    /// Enclosed-mass factor below `y_min`.
    pub core_gravity: f64,
    /// Nodes where a negative density was reset to zero, summed over steps.
    pub clips: usize,
}

impl RadialField {
    pub fn dy(&self) -> f64 {
        (self.grid[self.grid.len() - 1] - self.grid[0]) / (self.grid.len() - 1) as f64
    }

    fn check_finite(&self) -> Result<()> {
        match (0..self.grid.len()).find(|&i| !(self.rho_hat[i].is_finite() && self.u_hat[i].is_finite())) {
            Some(node) => Err(Error::NonFinite { node }),
            None => Ok(()),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("y,rho_hat,u_hat\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", self.grid[i], self.rho_hat[i], self.u_hat[i]);
        }
        out
    }

    /// `int m dy` by trapezoid; the physical mass on the domain is
    /// `e^tau` times this.
    pub fn similarity_mass(&self) -> f64 {
        let dy = self.dy();
        let m: Vec<f64> = self.grid.iter().zip(&self.rho_hat).map(|(y, r)| y * y * r).collect();
        dy * (m.iter().sum::<f64>() - 0.5 * (m[0] + m[m.len() - 1]))
    }
}

pub fn uniform_grid(y_min: f64, y_max: f64, nodes: usize) -> Vec<f64> {
    let dy = (y_max - y_min) / (nodes - 1) as f64;
    (0..nodes).map(|i| if i + 1 == nodes { y_max } else { y_min + i as f64 * dy }).collect()
}

/// Samples the profile `(R, V)` on a uniform grid over `[y_min, y_max]`.
pub fn init_from_trace(trace: &SolutionTrace, cfg: &PdeConfig) -> Result<RadialField> {
    cfg.validate()?;
    let (lo, hi) = trace.span();
    if cfg.y_min < lo || cfg.y_max > hi {
        return Err(Error::OutOfRange { y: if cfg.y_min < lo { cfg.y_min } else { cfg.y_max }, lo, hi });
    }
    let grid = uniform_grid(cfg.y_min, cfg.y_max, cfg.cells);
    let (rho_hat, u_hat) = reference(trace, &grid)?;
    let core_gravity = gravity_similarity(&trace.interpolate(cfg.y_min)?);
    Ok(RadialField { grid, rho_hat, u_hat, tau: 0.0, pressure: trace.pressure, core_gravity, clips: 0 })
}

fn reference(trace: &SolutionTrace, grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rho = Vec::with_capacity(grid.len());
    let mut u = Vec::with_capacity(grid.len());
    for &y in grid {
        let s = trace.interpolate(y)?;
        rho.push(s.r);
        u.push(s.v());
    }
    Ok((rho, u))
}

/// Time derivatives `(m_tau, q_tau)` at every node; zero at the boundary
/// nodes.
pub fn tendency(field: &RadialField, exec: Execution) -> (Vec<f64>, Vec<f64>) {
    let n = field.grid.len();
    let dy = field.dy();
    let y = &field.grid;
    let rho = &field.rho_hat;
    let u = &field.u_hat;
    let a = field.pressure.a();

    // midpoint upwind fluxes of m and q, index k for k + 1/2
    let mut flux = vec![(0.0, 0.0); n - 1];
    par::fill(exec, &mut flux, |k| {
        let c = 0.5 * ((u[k] - y[k]) + (u[k + 1] - y[k + 1]));
        let j = if c >= 0.0 { k } else { k + 1 };
        let m = y[j] * y[j] * rho[j];
        (c * m, c * m * u[j])
    });

    let mut grav = vec![0.0; n];
    grav[0] = field.core_gravity;
    for i in 1..n {
        let f0 = y[i - 1] * y[i - 1] * rho[i - 1];
        let f1 = y[i] * y[i] * rho[i];
        grav[i] = grav[i - 1] + 0.5 * dy * (f0 + f1);
    }

    let mut out = vec![(0.0, 0.0); n];
    par::fill(exec, &mut out, |i| {
        if i == 0 || i + 1 == n {
            return (0.0, 0.0);
        }
        let (yi, ri, ui) = (y[i], rho[i], u[i]);
        let m = yi * yi * ri;
        let q = m * ui;
        let dm = -(flux[i].0 - flux[i - 1].0) / dy - m;
        let rho_y = (rho[i + 1] - rho[i - 1]) / (2.0 * dy);
        let u_y = (u[i + 1] - u[i - 1]) / (2.0 * dy);
        let rp = 0.5 * (rho[i] + rho[i + 1]);
        let rm = 0.5 * (rho[i - 1] + rho[i]);
        let visc = (rp * (u[i + 1] - ui) - rm * (ui - u[i - 1])) / (dy * dy) + 2.0 * ri * (u_y / yi - ui / (yi * yi));
        let source = -a * yi * yi * rho_y + 2.0 * yi * yi * visc - grav[i] * ri;
        let dq = -(flux[i].1 - flux[i - 1].1) / dy - q + source;
        (dm, dq)
    });
    out.into_iter().unzip()
}

/// Largest stable step: advective and diffusive limits.
pub fn stable_dt(field: &RadialField, cfl: f64) -> f64 {
    let dy = field.dy();
    let speed =
        field.grid.iter().zip(&field.u_hat).map(|(y, u)| (u - y).abs()).fold(0.0, f64::max) + field.pressure.a().sqrt();
    let adv = if speed > 0.0 { dy / speed } else { f64::INFINITY };
    cfl * adv.min(dy * dy / 4.0)
}

/// One forward Euler step of size `dt`.
pub fn step_with(field: &RadialField, dt: f64, exec: Execution) -> Result<RadialField> {
    field.check_finite()?;
    if !(dt > 1e-300 && dt.is_finite()) {
        return Err(Error::CflViolation { dt });
    }
    let (dm, dq) = tendency(field, exec);
    let n = field.grid.len();
    let mut next = field.clone();
    let mut clips = 0;
    for i in 1..n - 1 {
        let y2 = field.grid[i] * field.grid[i];
        let m0 = y2 * field.rho_hat[i];
        let mut m = m0 + dt * dm[i];
        let q = m0 * field.u_hat[i] + dt * dq[i];
        if m < 0.0 {
            m = 0.0;
            clips += 1;
        }
        next.rho_hat[i] = m / y2;
        next.u_hat[i] = if m > 0.0 { q / m } else { 0.0 };
    }
    next.tau += dt;
    next.clips += clips;
    next.check_finite()?;
    Ok(next)
}

/// One step at the CFL-limited size.
pub fn step(field: &RadialField, cfg: &PdeConfig) -> Result<RadialField> {
    let dt = stable_dt(field, cfg.cfl);
    step_with(field, dt, cfg.execution)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub l2: f64,
    pub linf: f64,
}

fn combined(dy: f64, drho: &[f64], du: &[f64], rho_ref: &[f64], u_ref: &[f64]) -> Deviation {
    let l2 = |v: &[f64]| (dy * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let mx = |v: &[f64]| v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let rho_l2 = l2(rho_ref).max(f64::MIN_POSITIVE);
    let rho_mx = mx(rho_ref).max(f64::MIN_POSITIVE);
    Deviation {
        l2: l2(drho) / rho_l2 + l2(du) / l2(u_ref).max(1.0),
        linf: mx(drho) / rho_mx + mx(du) / mx(u_ref).max(1.0),
    }
}

/// Relative distance between the field and the profile on the field's grid.
/// Both norms add the density error relative to the profile density and the
/// velocity error relative to `max(|V|, 1)`.
pub fn deviation(field: &RadialField, trace: &SolutionTrace) -> Result<Deviation> {
    let (r, v) = reference(trace, &field.grid)?;
    Ok(deviation_from(field, &r, &v))
}

fn deviation_from(field: &RadialField, r: &[f64], v: &[f64]) -> Deviation {
    let drho: Vec<f64> = field.rho_hat.iter().zip(r).map(|(a, b)| a - b).collect();
    let du: Vec<f64> = field.u_hat.iter().zip(v).map(|(a, b)| a - b).collect();
    combined(field.dy(), &drho, &du, r, v)
}

/// Error of linear interpolation of the grid samples at cell midpoints,
/// in the units of [`deviation`]: how well the grid resolves the profile.
pub fn interpolation_deviation(field: &RadialField, trace: &SolutionTrace) -> Result<Deviation> {
    let n = field.grid.len();
    let mids: Vec<f64> = field.grid.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    let (r, v) = reference(trace, &mids)?;
    let drho: Vec<f64> = (0..n - 1).map(|k| 0.5 * (field.rho_hat[k] + field.rho_hat[k + 1]) - r[k]).collect();
    let du: Vec<f64> = (0..n - 1).map(|k| 0.5 * (field.u_hat[k] + field.u_hat[k + 1]) - v[k]).collect();
    Ok(combined(field.dy(), &drho, &du, &r, &v))
}

/// Norm of the discrete time derivative `(rho_tau, u_tau)` in the units of
/// [`deviation`], measured against the field itself.
pub fn residual_norm(field: &RadialField, exec: Execution) -> Deviation {
    let (dm, dq) = tendency(field, exec);
    let n = field.grid.len();
    let mut drho = vec![0.0; n];
    let mut du = vec![0.0; n];
    for i in 1..n - 1 {
        let y2 = field.grid[i] * field.grid[i];
        let m = y2 * field.rho_hat[i];
        drho[i] = dm[i] / y2;
        du[i] = if m > 0.0 { (dq[i] - field.u_hat[i] * dm[i]) / m } else { 0.0 };
    }
    combined(field.dy(), &drho, &du, &field.rho_hat, &field.u_hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationRecord {
    pub tau: f64,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evolution {
    pub field: RadialField,
    pub history: Vec<DeviationRecord>,
    pub snapshots: Vec<(f64, String)>,
    pub steps: usize,
    /// Deviation at `tau = 0` plus the grid's interpolation deviation.
    pub baseline_l2: f64,
}

impl Evolution {
    pub fn final_deviation(&self) -> DeviationRecord {
        self.history[self.history.len() - 1]
    }

    pub fn history_csv(&self) -> String {
        let mut out = String::from("tau,l2,linf\n");
        for r in &self.history {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", r.tau, r.l2, r.linf);
        }
        out
    }
}

/// Evolves the profile from `tau = 0` to `cfg.tau_end`, recording the
/// deviation every `cfg.record_every` and snapshots at `checkpoints`.
pub fn evolve(trace: &SolutionTrace, cfg: &PdeConfig, checkpoints: &[f64]) -> Result<Evolution> {
    let mut field = init_from_trace(trace, cfg)?;
    evolve_field(&mut field, trace, cfg, checkpoints).map(|(history, snapshots, steps, baseline_l2)| Evolution {
        field,
        history,
        snapshots,
        steps,
        baseline_l2,
    })
}

type EvolveParts = (Vec<DeviationRecord>, Vec<(f64, String)>, usize, f64);

fn evolve_field(
    field: &mut RadialField,
    trace: &SolutionTrace,
    cfg: &PdeConfig,
    checkpoints: &[f64],
) -> Result<EvolveParts> {
    let (r, v) = reference(trace, &field.grid)?;
    let d0 = deviation_from(field, &r, &v);
    let interp = interpolation_deviation(field, trace)?;
    let baseline_l2 = d0.l2 + interp.l2;
    let mut history = vec![DeviationRecord { tau: 0.0, l2: d0.l2, linf: d0.linf }];
    let mut pending: Vec<f64> = checkpoints.iter().cloned().filter(|t| *t >= 0.0 && *t <= cfg.tau_end).collect();
    pending.sort_by(f64::total_cmp);
    let mut snapshots = Vec::new();
    let mut next_record = cfg.record_every;
    let mut steps = 0;
    loop {
        while let Some(&t) = pending.first() {
            if t <= field.tau {
                snapshots.push((field.tau, field.to_csv()));
                pending.remove(0);
            } else {
                break;
            }
        }
        if field.tau >= cfg.tau_end {
            break;
        }
        let mut dt = stable_dt(field, cfg.cfl);
        let mut targets = vec![cfg.tau_end, next_record];
        targets.extend(pending.first());
        let target = targets.into_iter().fold(f64::INFINITY, f64::min);
        let mut snap = false;
        if field.tau + dt >= target {
            dt = target - field.tau;
            snap = true;
        }
        *field = step_with(field, dt, cfg.execution)?;
        if snap {
            field.tau = target;
        }
        steps += 1;
        if field.tau >= next_record || field.tau >= cfg.tau_end {
            let d = deviation_from(field, &r, &v);
            history.push(DeviationRecord { tau: field.tau, l2: d.l2, linf: d.linf });
            while next_record <= field.tau {
                next_record += cfg.record_every;
            }
        }
    }
    Ok((history, snapshots, steps, baseline_l2))
}
