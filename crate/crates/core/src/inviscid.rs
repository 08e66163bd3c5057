//! The inviscid similarity system and its sonic line.
//!
//! Without viscosity the system is first order in `(W, R)`. For `A = 1` the
//! density equation carries the factor `1 / (1 - (Wy)^2)`, so integration is
//! done in an arclength-like parameter `xi` with `dy/dxi = 1 - (Wy)^2`, which
//! keeps the vector field finite at the sonic line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::dopri;
use crate::selfsim::{PressureFlag, BREAKDOWN_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InviscidState {
    pub y: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

impl InviscidState {
    pub fn new(y: f64, w: f64, r: f64) -> Self {
        InviscidState { y, w, r }
    }

    /// `1 - (Wy)^2`
    pub fn sonic_denominator(&self) -> f64 {
        1.0 - (self.w * self.y).powi(2)
    }

    /// `R + 2W`
    pub fn lp_defect(&self) -> f64 {
        self.r + 2.0 * self.w
    }

    fn validate(&self) -> Result<()> {
        if !(self.y > 0.0) || !self.w.is_finite() || !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(Error::InvalidInput(format!("invalid inviscid state {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SonicClass {
    LarsonPenstonCandidate,
    BlowUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SonicReport {
    pub y_bar: f64,
    pub lp_defect: f64,
    pub classification: SonicClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InviscidConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub y_end: f64,
    pub max_steps: usize,
    /// Absolute tolerance on `1 - (Wy)^2` at a reported sonic point.
    pub sonic_tol: f64,
    /// `|R + 2W|` below this marks a Larson-Penston candidate.
    pub lp_tol: f64,
}

impl Default for InviscidConfig {
    fn default() -> Self {
        InviscidConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            y_end: 10.0,
            max_steps: 1_000_000,
            sonic_tol: 1e-8,
            lp_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InviscidStop {
    ReachedEnd,
    Sonic,
    BreakdownWZero,
    StepFailure,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InviscidTrace {
    pub samples: Vec<InviscidState>,
    pub pressure: PressureFlag,
    pub stop: InviscidStop,
}

/// `(dW/dy, dR/dy)`.
pub fn rhs_inviscid(state: &InviscidState, pressure: PressureFlag, sonic_tol: f64) -> Result<(f64, f64)> {
    let InviscidState { y, w, r } = *state;
    if y <= BREAKDOWN_THRESHOLD {
        return Err(Error::SingularEvaluation { y, w_abs: w.abs() });
    }
    let wy = w * y;
    // dR/R, well defined for R = 0 as well
    let log_dr = match pressure {
        PressureFlag::Isothermal => {
            let s = 1.0 - wy * wy;
            if s.abs() <= sonic_tol {
                return Err(Error::SonicSingular { y });
            }
            wy * (r + 2.0 * w) / s
        }
        PressureFlag::Vanishing => {
            if wy.abs() <= BREAKDOWN_THRESHOLD {
                return Err(Error::SingularEvaluation { y, w_abs: w.abs() });
            }
            -(r + 2.0 * w) / wy
        }
    };
    if r == 0.0 {
        return Ok((-(3.0 * w + 1.0) / y, 0.0));
    }
    let dw = (-log_dr * wy - (3.0 * w + 1.0)) / y;
    Ok((dw, r * log_dr))
}

/// Right-hand side in `xi` for state `[y, W, R]`.
fn rhs_xi(u: &[f64; 3], pressure: PressureFlag) -> Result<[f64; 3]> {
    let [y, w, r] = *u;
    if y <= BREAKDOWN_THRESHOLD || !(y.is_finite() && w.is_finite() && r.is_finite()) {
        return Err(Error::SingularEvaluation { y, w_abs: w.abs() });
    }
    match pressure {
        PressureFlag::Isothermal => {
            let wy = w * y;
            let s = 1.0 - wy * wy;
            let dr = if r == 0.0 { 0.0 } else { r * wy * (r + 2.0 * w) };
            let dw =
                if r == 0.0 { -(3.0 * w + 1.0) * s / y } else { (-wy * wy * (r + 2.0 * w) - (3.0 * w + 1.0) * s) / y };
            Ok([s, dw, dr])
        }
        PressureFlag::Vanishing => {
            let (dw, dr) = rhs_inviscid(&InviscidState::new(y, w, r), pressure, 0.0)?;
            Ok([1.0, dw, dr])
        }
    }
}

/// First root of `g` on the dense output of `st`, if `g` changes sign.
fn first_root<F: Fn(&[f64; 3]) -> f64>(st: &dopri::Step<3>, g: F) -> Option<f64> {
    const SUB: usize = 8;
    let mut lo = 0.0;
    let mut g_lo = g(&st.dense(0.0));
    for k in 1..=SUB {
        let hi = k as f64 / SUB as f64;
        let g_hi = g(&st.dense(hi));
        if g_lo == 0.0 {
            return Some(lo);
        }
        if g_lo * g_hi < 0.0 || g_hi == 0.0 {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m == a || m == b {
                    break;
                }
                if g(&st.dense(m)) * g_lo > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            // take the side with the smaller |g|
            let (ga, gb) = (g(&st.dense(a)).abs(), g(&st.dense(b)).abs());
            return Some(if ga <= gb { a } else { b });
        }
        lo = hi;
        g_lo = g_hi;
    }
    None
}

fn to_state(u: &[f64; 3]) -> InviscidState {
    InviscidState::new(u[0], u[1], u[2])
}

/// Integrates from `start` until `cfg.y_end`, the sonic line (`A = 1`) or
/// `W` reaching zero (`A = 0`). For `A = 1` a trajectory that approaches the
/// sonic line asymptotically stops once `|1 - (Wy)^2| <= sonic_tol`.
pub fn integrate_inviscid(
    start: InviscidState,
    pressure: PressureFlag,
    cfg: &InviscidConfig,
) -> Result<(InviscidTrace, Option<SonicReport>)> {
    start.validate()?;
    if !(cfg.y_end > start.y) {
        return Err(Error::InvalidInput(format!("y_end={} must exceed start y={}", cfg.y_end, start.y)));
    }
    if !(cfg.rel_tol > 0.0 && cfg.abs_tol > 0.0 && cfg.sonic_tol > 0.0 && cfg.lp_tol > 0.0) {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    let iso = pressure == PressureFlag::Isothermal;
    let s0 = start.sonic_denominator();
    if iso && s0.abs() <= cfg.sonic_tol {
        return Err(Error::SonicSingular { y: start.y });
    }
    // orient xi so that y increases
    let dir = if iso && s0 < 0.0 { -1.0 } else { 1.0 };
    let f = |_x: f64, u: &[f64; 3]| rhs_xi(u, pressure).map(|d| d.map(|v| dir * v));

    let mut u = [start.y, start.w, start.r];
    let mut k1 = f(0.0, &u)?;
    let mut x: f64 = 0.0;
    let span = cfg.y_end - start.y;
    let h_max = 0.01 * span / k1[0].abs().max(1e-3);
    let mut h = (1e-6 * start.y).min(h_max);
    let mut after_reject = false;
    let mut samples = vec![start];
    let report = |st: InviscidState| {
        let d = st.lp_defect();
        let classification =
            if d.abs() <= cfg.lp_tol { SonicClass::LarsonPenstonCandidate } else { SonicClass::BlowUp };
        SonicReport { y_bar: st.y, lp_defect: d, classification }
    };
    let finish = |samples: Vec<InviscidState>, stop| InviscidTrace { samples, pressure, stop };

    for _ in 0..cfg.max_steps {
        if h < 1e-14 * x.abs().max(1.0) {
            return Ok((finish(samples, InviscidStop::StepFailure), None));
        }
        let st = match dopri::step(&f, x, &u, &k1, h, cfg.rel_tol, cfg.abs_tol) {
            Ok(st) if st.err.is_finite() && st.y1.iter().all(|v| v.is_finite()) => st,
            _ => {
                h *= 0.25;
                after_reject = true;
                continue;
            }
        };
        if st.err > 1.0 {
            h *= dopri::step_factor(st.err, true);
            after_reject = true;
            continue;
        }
        // terminal conditions in order of the earliest crossing
        let sonic = if iso { first_root(&st, |v| 1.0 - (v[1] * v[0]).powi(2)) } else { None };
        let w_zero = if iso { None } else { first_root(&st, |v| v[1]) };
        let end = first_root(&st, |v| v[0] - cfg.y_end);
        let hits =
            [(sonic, InviscidStop::Sonic), (w_zero, InviscidStop::BreakdownWZero), (end, InviscidStop::ReachedEnd)];
        if let Some((theta, stop)) =
            hits.iter().filter_map(|(t, s)| t.map(|t| (t, *s))).min_by(|a, b| a.0.total_cmp(&b.0))
        {
            let mut at = to_state(&st.dense(theta));
            if stop == InviscidStop::ReachedEnd {
                at.y = cfg.y_end;
            }
            if at.y > samples[samples.len() - 1].y {
                samples.push(at);
            }
            let rep = (stop == InviscidStop::Sonic).then(|| report(at));
            return Ok((finish(samples, stop), rep));
        }
        x += h;
        u = st.y1;
        k1 = st.k7;
        let here = to_state(&u);
        if here.y > samples[samples.len() - 1].y {
            samples.push(here);
        }
        if iso && here.sonic_denominator().abs() <= cfg.sonic_tol {
            return Ok((finish(samples, InviscidStop::Sonic), Some(report(here))));
        }
        h = (h * dopri::step_factor(st.err, after_reject)).min(h_max);
        after_reject = false;
    }
    Ok((finish(samples, InviscidStop::BudgetExhausted), None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rhs_examples() {
        let (_, dr) = rhs_inviscid(&InviscidState::new(1.0, -1.0, 2.0), PressureFlag::Vanishing, 1e-8).unwrap();
        assert_eq!(dr, 0.0);
        let (_, dr) = rhs_inviscid(&InviscidState::new(1.0, -2.0, 1.0), PressureFlag::Vanishing, 1e-8).unwrap();
        assert_relative_eq!(dr, -1.5, max_relative = 1e-15);
        let (_, dr) = rhs_inviscid(&InviscidState::new(1.0, -0.5, 2.0), PressureFlag::Isothermal, 1e-8).unwrap();
        assert_relative_eq!(dr, -4.0 / 3.0, max_relative = 1e-15);
        let (dw, dr) = rhs_inviscid(&InviscidState::new(2.0, -1.0, 0.0), PressureFlag::Vanishing, 1e-8).unwrap();
        assert_eq!((dw, dr), (1.0, 0.0));
    }

    #[test]
    fn rhs_errors() {
        assert!(matches!(
            rhs_inviscid(&InviscidState::new(1.0, -1.0, 2.0), PressureFlag::Isothermal, 1e-8),
            Err(Error::SonicSingular { .. })
        ));
        assert!(matches!(
            rhs_inviscid(&InviscidState::new(1.0, 0.0, 2.0), PressureFlag::Vanishing, 1e-8),
            Err(Error::SingularEvaluation { .. })
        ));
    }

    #[test]
    fn mass_equation_holds() {
        // W'y = -(R'/R) W y - (3W + 1)
        for (y, w, r, p) in [(0.7, -1.3, 3.0, PressureFlag::Isothermal), (2.0, -0.2, 0.4, PressureFlag::Vanishing)] {
            let (dw, dr) = rhs_inviscid(&InviscidState::new(y, w, r), p, 1e-8).unwrap();
            assert_relative_eq!(dw * y, -(dr / r) * w * y - (3.0 * w + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn exact_start_reaches_lp_point() {
        let (tr, rep) = integrate_inviscid(
            InviscidState::new(0.5, -1.0, 8.0),
            PressureFlag::Isothermal,
            &InviscidConfig::default(),
        )
        .unwrap();
        assert_eq!(tr.stop, InviscidStop::Sonic);
        let rep = rep.unwrap();
        assert!((rep.y_bar - 1.0).abs() < 1e-6, "{rep:?}");
        assert!(rep.lp_defect.abs() <= 1e-4);
        assert_eq!(rep.classification, SonicClass::LarsonPenstonCandidate);
        let last = tr.samples.last().unwrap();
        assert!(last.sonic_denominator().abs() <= 1e-8);
        for s in &tr.samples {
            assert!((s.w + 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn perturbed_start_blows_up() {
        for r0 in [8.4, 8.5] {
            let (tr, rep) = integrate_inviscid(
                InviscidState::new(0.5, -1.0, r0),
                PressureFlag::Isothermal,
                &InviscidConfig::default(),
            )
            .unwrap();
            assert_eq!(tr.stop, InviscidStop::Sonic);
            let rep = rep.unwrap();
            assert!(tr.samples.last().unwrap().sonic_denominator().abs() <= 1e-8);
            assert_eq!(rep.classification, SonicClass::BlowUp, "{rep:?}");
        }
    }

    #[test]
    fn vanishing_pressure_runs_without_sonic_concept() {
        let cfg = InviscidConfig { y_end: 0.5, ..Default::default() };
        let (tr, rep) = integrate_inviscid(InviscidState::new(0.1, -2.0, 1.0), PressureFlag::Vanishing, &cfg).unwrap();
        assert!(rep.is_none());
        assert!(matches!(tr.stop, InviscidStop::ReachedEnd | InviscidStop::BreakdownWZero));
        assert!(tr.samples.iter().all(|s| s.w < 0.0));
        assert!(tr.samples.windows(2).all(|p| p[1].y > p[0].y));
    }

    #[test]
    fn lp_relation_is_stationary_for_vanishing_pressure() {
        // R + 2W = 0 keeps R stationary at the start
        let s = InviscidState::new(0.3, -1.0, 2.0);
        assert_eq!(rhs_inviscid(&s, PressureFlag::Vanishing, 1e-8).unwrap().1, 0.0);
    }

    #[test]
    fn rejects_bad_start() {
        let cfg = InviscidConfig::default();
        assert!(integrate_inviscid(InviscidState::new(-1.0, -1.0, 1.0), PressureFlag::Vanishing, &cfg).is_err());
        assert!(integrate_inviscid(InviscidState::new(1.0, -1.0, -1.0), PressureFlag::Vanishing, &cfg).is_err());
        assert!(integrate_inviscid(InviscidState::new(1.0, -1.0, 2.0), PressureFlag::Isothermal, &cfg).is_err());
    }

    #[test]
    fn report_json_shape() {
        let r = SonicReport { y_bar: 1.0, lp_defect: 0.0, classification: SonicClass::BlowUp };
        let v = serde_json::to_value(r).unwrap();
        assert_eq!(v["classification"], "BlowUp");
        assert!(v.get("y_bar").is_some() && v.get("lp_defect").is_some());
    }
}
