//! Core of the shadow-wave construction.
//!
//! Inside the cone `|x| < eps t` the density is `alpha(t) eps^-3` and the
//! velocity `beta(t) eps^nu`. Outside, the similarity profile supplies
//! `rho_1(eps t, t) = R(eps)/t^2` and `u_1(eps t, t) = V(eps)`. This module
//! solves the amplitude balance, reports the core mass and probes how the
//! reduced weak residuals scale with `eps`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre, loglog_fit, simpson};
use crate::ode::{integrate, IntegratorConfig};
use crate::par::{self, Execution};
use crate::selfsim::{map_initial, PhysicalInit, PressureFlag, SimilarityState};
use crate::trace::{SolutionTrace, Termination};

/// Velocity amplitude of the core.
#[derive(Clone)]
pub enum Beta {
    Constant(f64),
    Profile(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Beta {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Beta::Constant(b) => *b,
            Beta::Profile(f) => f(t),
        }
    }
}

impl std::fmt::Debug for Beta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Beta::Constant(b) => write!(f, "Constant({b})"),
            Beta::Profile(_) => f.write_str("Profile(..)"),
        }
    }
}

/// Density amplitude `alpha(t)`.
#[derive(Clone)]
pub enum Alpha {
    /// `coeff * t^power`
    PowerLaw { coeff: f64, power: f64 },
    /// `alpha0 exp(-3 int_{t0}^{t} (1 - beta(s))/s ds)`
    Quadrature { alpha0: f64, t0: f64 },
    /// Arbitrary amplitude, not necessarily balanced.
    Given(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Alpha {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Alpha::PowerLaw { coeff, power } => write!(f, "PowerLaw({coeff} t^{power})"),
            Alpha::Quadrature { alpha0, t0 } => write!(f, "Quadrature(alpha0={alpha0}, t0={t0})"),
            Alpha::Given(_) => f.write_str("Given(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoreState {
    pub nu: f64,
    pub alpha: Alpha,
    pub beta: Beta,
    pub eps: f64,
}

const LOG_PANELS: usize = 32;
const BOUNDEDNESS_SAMPLES: usize = 100;

impl CoreState {
    /// Core with a prescribed amplitude, e.g. one that violates the balance.
    pub fn given(nu: f64, alpha: impl Fn(f64) -> f64 + Send + Sync + 'static, beta: Beta, eps: f64) -> Self {
        CoreState { nu, alpha: Alpha::Given(Arc::new(alpha)), beta, eps }
    }

    /// Whether the `beta` term enters the balance.
    fn beta_coupled(&self) -> bool {
        self.nu == 1.0
    }

    pub fn alpha_at(&self, t: f64) -> f64 {
        match &self.alpha {
            Alpha::PowerLaw { coeff, power } => coeff * t.powf(*power),
            Alpha::Quadrature { alpha0, t0 } => {
                let integrand = |u: f64| 1.0 - self.beta.at(u.exp());
                alpha0 * (-3.0 * gauss_legendre(integrand, t0.ln(), t.ln(), LOG_PANELS)).exp()
            }
            Alpha::Given(f) => f(t),
        }
    }

    /// `alpha(t) t^3`, exact for power laws with exponent `-3`.
    pub fn alpha_t3(&self, t: f64) -> f64 {
        match &self.alpha {
            Alpha::PowerLaw { coeff, power } if *power == -3.0 => *coeff,
            Alpha::PowerLaw { coeff, power } => coeff * t.powf(power + 3.0),
            _ => self.alpha_at(t) * t.powi(3),
        }
    }

    /// `t alpha'(t)`: analytic for power laws, a 5-point central difference
    /// otherwise.
    pub fn t_alpha_prime(&self, t: f64) -> f64 {
        match &self.alpha {
            Alpha::PowerLaw { power, .. } => power * self.alpha_at(t),
            _ => {
                let h = 1e-3 * t;
                let f = |x: f64| self.alpha_at(x);
                t * (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h)
            }
        }
    }

    /// `(t/3) alpha' + alpha (1 - beta [nu = 1])`.
    pub fn balance_defect(&self, t: f64) -> f64 {
        let coupling = if self.beta_coupled() { self.beta.at(t) } else { 0.0 };
        self.t_alpha_prime(t) / 3.0 + self.alpha_at(t) * (1.0 - coupling)
    }

    /// Balance defect relative to `alpha(t)`, with `alpha'` always taken by
    /// finite differences.
    pub fn balance_residual_fd(&self, t: f64) -> f64 {
        let h = 2e-4 * t;
        let f = |x: f64| self.alpha_at(x);
        let da = (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h);
        let coupling = if self.beta_coupled() { self.beta.at(t) } else { 0.0 };
        let a = f(t);
        (t * da / 3.0 + a * (1.0 - coupling)) / a
    }
}

/// Solves the amplitude balance on `[t0, t1]` from `alpha(t0) = alpha0`.
pub fn solve_alpha(nu: f64, beta: Beta, alpha0: f64, t0: f64, t1: f64, eps: f64) -> Result<CoreState> {
    if !(nu >= 1.0) {
        return Err(Error::InvalidInput(format!("nu must be >= 1, got {nu}")));
    }
    if !(t0 > 0.0 && t1 > t0) {
        return Err(Error::InvalidInput(format!("need 0 < t0 < t1, got [{t0}, {t1}]")));
    }
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha0 must be positive, got {alpha0}")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    for k in 0..=BOUNDEDNESS_SAMPLES {
        let t = t0 + (t1 - t0) * k as f64 / BOUNDEDNESS_SAMPLES as f64;
        if !beta.at(t).is_finite() {
            return Err(Error::InvalidInput(format!("beta not finite at t={t}")));
        }
    }
    let power_law = |power: f64| Alpha::PowerLaw { coeff: alpha0 * t0.powf(-power), power };
    let alpha = match (&beta, nu > 1.0) {
        (_, true) | (Beta::Constant(0.0), _) => Alpha::PowerLaw { coeff: alpha0 * t0.powi(3), power: -3.0 },
        (Beta::Constant(b), false) => power_law(-3.0 * (1.0 - b)),
        (Beta::Profile(_), false) => Alpha::Quadrature { alpha0, t0 },
    };
    Ok(CoreState { nu, alpha, beta, eps })
}

/// `M(t) = (4/3) pi alpha(t) t^3`.
pub fn core_mass(core: &CoreState, t: f64) -> f64 {
    4.0 / 3.0 * PI * core.alpha_t3(t)
}

/// `rho_1` and `u_1` at the cone boundary `r = eps t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryValues {
    pub rho1: f64,
    pub u1: f64,
    /// `t d_r u_1`
    pub t_du1: f64,
}

pub fn boundary_values(trace: &SolutionTrace, eps: f64, t: f64) -> Result<BoundaryValues> {
    let s = trace.first();
    if (s.y - eps).abs() > 1e-12 * eps {
        return Err(Error::Precondition(format!("trace starts at y={} but eps={eps}", s.y)));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    Ok(BoundaryValues { rho1: s.r / (t * t), u1: s.v(), t_du1: v_prime(s) })
}

/// `V' = W + 1 + y W'`.
fn v_prime(s: &SimilarityState) -> f64 {
    s.w + 1.0 + s.y * s.wp
}

/// `(1/3) alpha' t + alpha (1 - beta [nu = 1]) + eps^2 rho_1 u_1`.
pub fn mass_residual(core: &CoreState, trace: &SolutionTrace, t: f64) -> Result<f64> {
    let b = boundary_values(trace, core.eps, t)?;
    Ok(core.balance_defect(t) + core.eps * core.eps * b.rho1 * b.u1)
}

/// `eps^2 rho_1 (u_1^2 - t d_r u_1)`.
pub fn momentum_residual(core: &CoreState, trace: &SolutionTrace, t: f64) -> Result<f64> {
    let b = boundary_values(trace, core.eps, t)?;
    Ok(core.eps * core.eps * b.rho1 * (b.u1 * b.u1 - b.t_du1))
}

/// Ratio of outer to core density at the cone, `(R(eps)/t^2) / (alpha eps^-3)`.
pub fn core_density_ratio(core: &CoreState, trace: &SolutionTrace, t: f64) -> Result<f64> {
    let b = boundary_values(trace, core.eps, t)?;
    Ok(b.rho1 * core.eps.powi(3) / core.alpha_at(t))
}

/// `eps rho_1 u_1^2` at `t = 1`.
pub fn inviscid_admissibility(trace: &SolutionTrace, eps: f64) -> Result<f64> {
    let b = boundary_values(trace, eps, 1.0)?;
    Ok(eps * b.rho1 * b.u1 * b.u1)
}

/// Whether `values` stay bounded as `eps` decreases: identically zero, or a
/// log-log slope no steeper than `-slope_tol`.
pub fn bounded_across(eps: &[f64], values: &[f64], slope_tol: f64) -> bool {
    let nz: Vec<(f64, f64)> = eps.iter().zip(values).filter(|(_, v)| v.abs() > 0.0).map(|(e, v)| (*e, *v)).collect();
    if nz.len() < 2 {
        return values.iter().all(|v| v.is_finite());
    }
    let (e, v): (Vec<f64>, Vec<f64>) = nz.into_iter().unzip();
    loglog_fit(&e, &v).slope >= -slope_tol
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub eps: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub slope: f64,
    pub fit_residual: f64,
}

impl ScalingFit {
    pub fn new(eps: Vec<f64>, magnitude: Vec<f64>) -> Result<Self> {
        if eps.len() != magnitude.len() || eps.len() < 3 {
            return Err(Error::InvalidInput("scaling fit needs at least 3 matched points".into()));
        }
        if eps.windows(2).any(|p| !(p[1] < p[0])) {
            return Err(Error::InvalidInput("eps values must be strictly decreasing".into()));
        }
        let f = loglog_fit(&eps, &magnitude);
        Ok(ScalingFit { eps, magnitude, slope: f.slope, fit_residual: f.rms_residual })
    }
}

/// One point of an `eps` sweep, evaluated at `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub u1: f64,
    pub rho1: f64,
    pub mass_res: f64,
    pub mom_res: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFits {
    pub u1: ScalingFit,
    pub rho1: ScalingFit,
    pub mass_residual: ScalingFit,
    pub momentum_residual: ScalingFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<SweepRow>,
    pub fits: Option<ScalingFits>,
    /// First failing sweep point; rows stop before it.
    pub failure: Option<String>,
}

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,u1,rho1,mass_res,mom_res\n");
        for r in &self.rows {
            let _ =
                writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", r.eps, r.u1, r.rho1, r.mass_res, r.mom_res);
        }
        out
    }
}

/// Integrates the family `(v, v1, d1)` from every `eps` in `eps_values` and
/// fits how `|u_1|`, `rho_1` and both residuals scale. The core is the
/// balanced `nu = 2` amplitude `alpha = t^-3`.
pub fn admissibility_scaling(
    base: &PhysicalInit,
    eps_values: &[f64],
    pressure: PressureFlag,
    cfg: &IntegratorConfig,
    exec: Execution,
) -> Result<ScalingReport> {
    if eps_values.len() < 3 {
        return Err(Error::InvalidInput("sweep needs at least 3 eps values".into()));
    }
    if eps_values.windows(2).any(|p| !(p[1] < p[0])) {
        return Err(Error::InvalidInput("eps values must be strictly decreasing".into()));
    }
    if eps_values[0] / eps_values[eps_values.len() - 1] < 100.0 {
        return Err(Error::InvalidInput("eps values must span at least two decades".into()));
    }
    let results = par::map(exec, eps_values, |&eps| sweep_point(base, eps, pressure, cfg));
    let mut rows = Vec::with_capacity(results.len());
    let mut failure = None;
    for (eps, r) in eps_values.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                failure = Some(format!("eps={eps}: {e}"));
                break;
            }
        }
    }
    let fits = if failure.is_none() { Some(fit_rows(&rows)?) } else { None };
    Ok(ScalingReport { rows, fits, failure })
}

fn sweep_point(base: &PhysicalInit, eps: f64, pressure: PressureFlag, cfg: &IntegratorConfig) -> Result<SweepRow> {
    let init = PhysicalInit { eps, ..*base };
    init.validate().map_err(|(field, msg)| Error::InvalidInput(format!("{field}: {msg}")))?;
    let trace = integrate(map_initial(&init), pressure, cfg)?;
    if trace.termination != Termination::ReachedEnd {
        return Err(Error::Integration { y: trace.last().y, reason: format!("{:?}", trace.termination) });
    }
    let core = solve_alpha(2.0, Beta::Constant(0.0), 1.0, 1.0, 2.0, eps)?;
    let b = boundary_values(&trace, eps, 1.0)?;
    Ok(SweepRow {
        eps,
        u1: b.u1,
        rho1: b.rho1,
        mass_res: mass_residual(&core, &trace, 1.0)?,
        mom_res: momentum_residual(&core, &trace, 1.0)?,
    })
}

fn fit_rows(rows: &[SweepRow]) -> Result<ScalingFits> {
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let col = |f: fn(&SweepRow) -> f64| ScalingFit::new(eps.clone(), rows.iter().map(|r| f(r).abs()).collect());
    Ok(ScalingFits {
        u1: col(|r| r.u1)?,
        rho1: col(|r| r.rho1)?,
        mass_residual: col(|r| r.mass_res)?,
        momentum_residual: col(|r| r.mom_res)?,
    })
}

/// Smooth bump supported on `[t_a, t_b]`, used to weight residuals in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakProbe {
    pub t_a: f64,
    pub t_b: f64,
    pub quadrature_nodes: usize,
}

impl WeakProbe {
    pub fn new(t_a: f64, t_b: f64, quadrature_nodes: usize) -> Result<Self> {
        if !(t_a > 0.0 && t_b > t_a) {
            return Err(Error::InvalidInput(format!("need 0 < t_a < t_b, got [{t_a}, {t_b}]")));
        }
        Ok(WeakProbe { t_a, t_b, quadrature_nodes: quadrature_nodes.max(2) })
    }

    pub fn phi(&self, t: f64) -> f64 {
        let s = (2.0 * t - self.t_a - self.t_b) / (self.t_b - self.t_a);
        if s.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - s * s)).exp()
        }
    }

    /// `int f(t) phi(t) dt` over the support.
    pub fn pair<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        simpson(|t| f(t) * self.phi(t), self.t_a, self.t_b, self.quadrature_nodes)
    }

    /// Evenly spaced interior times, e.g. for uniformity checks.
    pub fn checkpoints(&self, n: usize) -> Vec<f64> {
        (1..=n).map(|k| self.t_a + (self.t_b - self.t_a) * k as f64 / (n + 1) as f64).collect()
    }
}
