//! Adaptive integration of the similarity system.
//!
//! `integrate` runs a Dormand-Prince 5(4) pair with step-size control, walks
//! the dense output of every accepted step to locate sign changes of `W''`,
//! `W'` and `W + 1`, and stops on `W -> 0` (the only way the viscous system
//! can break down).

pub mod dopri;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::fornberg_weights;
use crate::selfsim::{rhs, DerivativeTriple, PressureFlag, SimilarityState, BREAKDOWN_THRESHOLD};
use crate::trace::{EventKind, EventRecord, IntegrationStats, SolutionTrace, Termination};

/// Below this `|W|` the engine caps steps at a tenth of `h_max`.
pub const NEAR_BREAKDOWN: f64 = 1e-6;

/// Dense-output sub-points per step scanned for sign changes.
const EVENT_SUBDIVISIONS: usize = 8;

/// Scaled event functions below this magnitude count as zero.
const EVENT_NOISE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Defaults to `1e-6 * start.y`.
    pub h_init: Option<f64>,
    /// Defaults to `0.01 * (y_end - start.y)`.
    pub h_max: Option<f64>,
    pub y_end: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            h_init: None,
            h_max: None,
            y_end: 10.0,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_end(y_end: f64) -> Self {
        IntegratorConfig { y_end, ..Default::default() }
    }

    fn validate(&self, y0: f64) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if !(self.y_end > y0) {
            return Err(Error::InvalidInput(format!("y_end={} must exceed start y={y0}", self.y_end)));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidInput("max_steps must be positive".into()));
        }
        if matches!(self.h_init, Some(h) if !(h > 0.0)) || matches!(self.h_max, Some(h) if !(h > 0.0)) {
            return Err(Error::InvalidInput("step sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Integrates the similarity system from `start` to `cfg.y_end`.
///
/// Early stops are reported through `SolutionTrace::termination`; `Err` is
/// returned only for invalid input.
pub fn integrate(start: SimilarityState, pressure: PressureFlag, cfg: &IntegratorConfig) -> Result<SolutionTrace> {
    integrate_with(start, pressure, cfg, |s| rhs(s, pressure))
}

/// Same as [`integrate`] with a caller-supplied right-hand side.
pub fn integrate_with<F>(
    start: SimilarityState,
    pressure: PressureFlag,
    cfg: &IntegratorConfig,
    f: F,
) -> Result<SolutionTrace>
where
    F: Fn(&SimilarityState) -> Result<DerivativeTriple>,
{
    start.validate()?;
    cfg.validate(start.y)?;
    if start.w.abs() <= BREAKDOWN_THRESHOLD {
        return Err(Error::InvalidInput("start W at breakdown threshold".into()));
    }
    let evals = std::cell::Cell::new(0usize);
    let sys = |y: f64, u: &[f64; 3]| -> Result<[f64; 3]> {
        evals.set(evals.get() + 1);
        f(&SimilarityState::from_array(y, *u)).map(|d| d.as_array())
    };

    let span = cfg.y_end - start.y;
    let h_max = cfg.h_max.unwrap_or(0.01 * span);
    let mut h = cfg.h_init.unwrap_or(1e-6 * start.y).min(h_max);
    let mut y = start.y;
    let mut u = start.as_array();
    let mut k1 = sys(y, &u)?;

    let mut samples = vec![start];
    let mut events: Vec<EventRecord> = Vec::new();
    let mut stats = IntegrationStats { h_min_attempted: f64::INFINITY, ..Default::default() };
    let mut after_reject = false;
    let mut termination = Termination::ReachedEnd;

    while y < cfg.y_end {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            termination = Termination::BudgetExhausted;
            break;
        }
        let cap = if u[0].abs() < NEAR_BREAKDOWN { 0.1 * h_max } else { h_max };
        h = h.min(cap);
        let last = cfg.y_end - y <= h * (1.0 + 1e-12);
        if last {
            h = cfg.y_end - y;
        }
        let h_floor = 1e-14 * y.abs().max(1.0);
        if h < h_floor {
            termination = Termination::StepFailure;
            break;
        }
        stats.h_min_attempted = stats.h_min_attempted.min(h);

        let attempt = dopri::step(&sys, y, &u, &k1, h, cfg.rel_tol, cfg.abs_tol);
        let st = match attempt {
            Ok(st) if st.err <= 1.0 && st.y1.iter().all(|v| v.is_finite()) => st,
            Ok(st) => {
                stats.rejected += 1;
                h *= if st.err.is_finite() { dopri::step_factor(st.err, true) } else { 0.25 };
                after_reject = true;
                continue;
            }
            Err(_) => {
                stats.rejected += 1;
                h *= 0.25;
                after_reject = true;
                continue;
            }
        };

        let y_new = if last { cfg.y_end } else { y + h };
        stats.accepted += 1;

        // W crossing zero inside the step: locate it and stop there.
        // Bisected down to floating-point resolution in y.
        let w_cross = crossing_in_step(&st, y, y_new, |_, v| Some(v[0]), 0.0);
        if let Some(c) = w_cross.first() {
            let ystar = c.y;
            let v = st.dense_at(ystar);
            scan_events(&st, y, ystar, &sys, &mut events, &mut samples, cfg.rel_tol);
            push_sample(&mut samples, SimilarityState::from_array(ystar, v));
            termination = Termination::BreakdownWZero;
            break;
        }

        scan_events(&st, y, y_new, &sys, &mut events, &mut samples, cfg.rel_tol);
        y = y_new;
        u = st.y1;
        k1 = st.k7;
        push_sample(&mut samples, SimilarityState::from_array(y, u));

        if u[0].abs() <= BREAKDOWN_THRESHOLD {
            termination = Termination::BreakdownWZero;
            break;
        }
        h *= dopri::step_factor(st.err, after_reject);
        after_reject = false;
    }
    stats.rhs_evals = evals.get();
    events.sort_by(|a, b| a.y_star.total_cmp(&b.y_star));
    Ok(SolutionTrace { samples, pressure, events, termination, stats })
}

fn push_sample(samples: &mut Vec<SimilarityState>, s: SimilarityState) {
    if samples.last().is_none_or(|p| s.y > p.y) {
        samples.push(s);
    }
}

#[derive(Debug, Clone, Copy)]
struct Crossing {
    y: f64,
    rising: bool,
}

/// Sign changes of `g` along the dense output of one step, located by
/// bisection to `rel_tol * max(1, y)`. `g` is expected to be scaled to order
/// one; changes between values that both stay within `EVENT_NOISE` of zero
/// are round-off and ignored.
fn crossing_in_step<const N: usize, G>(st: &dopri::Step<N>, y0: f64, y1: f64, g: G, rel_tol: f64) -> Vec<Crossing>
where
    G: Fn(f64, &[f64; N]) -> Option<f64>,
{
    let mut out = Vec::new();
    let eval = |x: f64| g(x, &st.dense_at(x));
    let mut xa = y0;
    let mut ga = eval(xa);
    for k in 1..=EVENT_SUBDIVISIONS {
        let xb = if k == EVENT_SUBDIVISIONS { y1 } else { y0 + (y1 - y0) * k as f64 / EVENT_SUBDIVISIONS as f64 };
        let gb = eval(xb);
        if let (Some(a), Some(b)) = (ga, gb) {
            // a crossing is counted when the sign leaves strict negativity or
            // strict positivity; a zero at the left end belongs to the previous interval
            let significant = a.abs().max(b.abs()) > EVENT_NOISE;
            if significant && ((a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0)) {
                let rising = a < 0.0;
                let (mut lo, mut hi) = (xa, xb);
                let tol = rel_tol * lo.abs().max(1.0);
                let mut guard = 0;
                while hi - lo > tol && guard < 200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    match eval(mid) {
                        Some(gm) if (gm < 0.0) == (a < 0.0) && gm != 0.0 => lo = mid,
                        Some(_) => hi = mid,
                        None => break,
                    }
                    guard += 1;
                }
                out.push(Crossing { y: 0.5 * (lo + hi), rising });
            }
        }
        xa = xb;
        ga = gb;
    }
    out
}

fn scan_events<F>(
    st: &dopri::Step<3>,
    y0: f64,
    y1: f64,
    sys: &F,
    events: &mut Vec<EventRecord>,
    samples: &mut Vec<SimilarityState>,
    rel_tol: f64,
) where
    F: Fn(f64, &[f64; 3]) -> Result<[f64; 3]>,
{
    let mut found: Vec<(EventKind, f64)> = Vec::new();
    let scale = |x: f64, v: &[f64; 3]| 1.0 + v[0].abs() + (x * v[1]).abs();
    for c in crossing_in_step(st, y0, y1, |x, v| sys(x, v).ok().map(|d| d[1] * x * x / scale(x, v)), rel_tol) {
        found.push((if c.rising { EventKind::InflectionDown } else { EventKind::InflectionUp }, c.y));
    }
    for c in crossing_in_step(st, y0, y1, |x, v| Some(v[1] * x / scale(x, v)), rel_tol) {
        found.push((if c.rising { EventKind::VelocityMin } else { EventKind::WpSignChange }, c.y));
    }
    for c in crossing_in_step(st, y0, y1, |x, v| Some((v[0] + 1.0) / scale(x, v)), rel_tol) {
        if c.rising {
            found.push((EventKind::CrossMinusOne, c.y));
        }
    }
    found.sort_by(|a, b| a.1.total_cmp(&b.1));
    for (kind, ys) in found {
        let state_at = SimilarityState::from_array(ys, st.dense_at(ys));
        events.push(EventRecord { kind, y_star: ys, state_at });
        if ys < y1 {
            push_sample(samples, state_at);
        }
    }
}

/// Classical fixed-step RK4 from `start` to `y_end`.
pub fn fixed_step_rk4(start: SimilarityState, pressure: PressureFlag, h: f64, y_end: f64) -> Result<SolutionTrace> {
    start.validate()?;
    let span = y_end - start.y;
    if !(h > 0.0) || !(span > 0.0) || h > span * (1.0 + 1e-12) {
        return Err(Error::BadStep(format!("step {h} does not fit span {span}")));
    }
    let n = (span / h).round();
    if (n * h - span).abs() > 1e-9 * span {
        return Err(Error::BadStep(format!("step {h} does not divide span {span}")));
    }
    let n = n as usize;
    let f = |y: f64, u: &[f64; 3]| rhs(&SimilarityState::from_array(y, *u), pressure).map(|d| d.as_array());
    let add = |u: &[f64; 3], k: &[f64; 3], s: f64| -> [f64; 3] { std::array::from_fn(|i| u[i] + s * k[i]) };
    let mut u = start.as_array();
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(start);
    for i in 0..n {
        let y = start.y + i as f64 * h;
        let k1 = f(y, &u)?;
        let k2 = f(y + 0.5 * h, &add(&u, &k1, 0.5 * h))?;
        let k3 = f(y + 0.5 * h, &add(&u, &k2, 0.5 * h))?;
        let k4 = f(y + h, &add(&u, &k3, h))?;
        u = std::array::from_fn(|j| u[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]));
        let y_next = if i + 1 == n { y_end } else { start.y + (i + 1) as f64 * h };
        samples.push(SimilarityState::from_array(y_next, u));
    }
    let mut trace = SolutionTrace::from_samples(samples, pressure)?;
    trace.stats.accepted = n;
    Ok(trace)
}

/// Minimum stencil spacing relative to `y`; adjacent adaptive samples can be
/// so close that differencing them only amplifies the local step error.
const STENCIL_SPACING: f64 = 5e-3;

/// Stencil around sample `i`: up to two nodes on each side, nearest to
/// `y +- g` and `y +- 2g` with `g = STENCIL_SPACING * y`. Near the trace ends
/// fewer nodes are available on one side and the stencil becomes lopsided.
fn centred_stencil(s: &[SimilarityState], i: usize) -> Option<Vec<usize>> {
    let n = s.len();
    if i == 0 || i + 1 >= n {
        return None;
    }
    let y = s[i].y;
    let g = STENCIL_SPACING * y;
    // nearest sample to `target` among indices in [lo, hi)
    let nearest = |target: f64, lo: usize, hi: usize| -> Option<usize> {
        if lo >= hi {
            return None;
        }
        let k = (lo + s[lo..hi].partition_point(|p| p.y < target)).min(hi - 1);
        if k > lo && (target - s[k - 1].y).abs() < (s[k].y - target).abs() {
            Some(k - 1)
        } else {
            Some(k)
        }
    };
    let r1 = nearest(y + g, i + 1, n)?;
    let l1 = nearest(y - g, 0, i)?;
    let mut idx = Vec::with_capacity(5);
    idx.extend(nearest(y - 2.0 * g, 0, l1));
    idx.extend([l1, i, r1]);
    idx.extend(nearest(y + 2.0 * g, r1 + 1, n));
    Some(idx)
}

/// Maximum scaled residual of both implicit equations along `trace`, with
/// `R'` and `W''` from centred finite differences over the samples (five
/// nodes where the trace allows, three otherwise).
pub fn residual(trace: &SolutionTrace, pressure: PressureFlag) -> Result<f64> {
    Ok(residual_profile(trace, pressure)?.into_iter().fold(0.0, |m, (_, e)| m.max(e)))
}

/// Per-sample scaled residual `(y, max(e1, e2))` behind [`residual`].
pub fn residual_profile(trace: &SolutionTrace, pressure: PressureFlag) -> Result<Vec<(f64, f64)>> {
    let s = &trace.samples;
    let n = s.len();
    if n < 3 {
        return Err(Error::Precondition(format!("residual needs at least 3 samples, got {n}")));
    }
    let a = pressure.a();
    let mut out = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        let Some(idx) = centred_stencil(s, i) else { continue };
        let xs: Vec<f64> = idx.iter().map(|&j| s[j].y).collect();
        let w = fornberg_weights(s[i].y, &xs, 1);
        let d =
            |g: &dyn Fn(&SimilarityState) -> f64| -> f64 { idx.iter().zip(&w[1]).map(|(&j, c)| c * g(&s[j])).sum() };
        let r_p = d(&|p| p.r);
        let w_pp = d(&|p| p.wp);
        let SimilarityState { y, w: ww, wp, r } = s[i];
        let h = wp * y + 3.0 * ww + 1.0;
        let t1 = r_p * ww * y;
        let t2 = r * h;
        let e1 = (t1 + t2).abs() / (t1.abs() + t2.abs() + f64::MIN_POSITIVE);
        let lhs = w_pp * ww * y * y;
        let parts = [
            0.5 * (ww * y).powi(2) * (wp * y + ww + 1.0 - r),
            (wp * y + 1.0).powi(2),
            4.0 * ww,
            3.0 * ww * ww,
            -0.5 * a * h,
        ];
        let rhs_sum: f64 = parts.iter().sum();
        let scale = lhs.abs() + parts.iter().map(|p| p.abs()).sum::<f64>() + f64::MIN_POSITIVE;
        let e2 = (lhs - rhs_sum).abs() / scale;
        out.push((y, e1.max(e2)));
    }
    Ok(out)
}
