//! Self-similar form of the radial system.
//!
//! With `y = r/t`, `rho = R(y)/t^2`, `u = V(y)` and the reduced velocity
//! `W = (V - y)/y`, the viscous isothermal Euler-Poisson system with
//! `mu(rho) = t*rho` collapses to a second order ODE in `W` coupled to a first
//! order ODE in `R`. This module holds the phase-point types, the explicit
//! right-hand side and the maps between ODE data and physical fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::SolutionTrace;

/// `|W|` and `y` at or below this value count as ODE breakdown.
pub const BREAKDOWN_THRESHOLD: f64 = 1e-12;

/// Pressure law `p = A rho`, with `A` either 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum PressureFlag {
    /// `A = 0`
    Vanishing,
    /// `A = 1`
    Isothermal,
}

impl PressureFlag {
    pub fn a(self) -> f64 {
        match self {
            PressureFlag::Vanishing => 0.0,
            PressureFlag::Isothermal => 1.0,
        }
    }
}

impl TryFrom<u8> for PressureFlag {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            0 => Ok(PressureFlag::Vanishing),
            1 => Ok(PressureFlag::Isothermal),
            other => Err(format!("pressure flag A must be 0 or 1, got {other}")),
        }
    }
}

impl From<PressureFlag> for u8 {
    fn from(p: PressureFlag) -> u8 {
        match p {
            PressureFlag::Vanishing => 0,
            PressureFlag::Isothermal => 1,
        }
    }
}

/// Phase point `(W, W', R)` at coordinate `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityState {
    pub y: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "Wp")]
    pub wp: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

impl SimilarityState {
    pub fn new(y: f64, w: f64, wp: f64, r: f64) -> Self {
        SimilarityState { y, w, wp, r }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.y.is_finite() && self.w.is_finite() && self.wp.is_finite() && self.r.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite state {self:?}")));
        }
        if self.y <= 0.0 {
            return Err(Error::InvalidInput(format!("y must be positive, got {}", self.y)));
        }
        if self.r < 0.0 {
            return Err(Error::InvalidInput(format!("R must be non-negative, got {}", self.r)));
        }
        Ok(())
    }

    /// Radial velocity profile `V = y (W + 1)`.
    pub fn v(&self) -> f64 {
        self.y * (self.w + 1.0)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.w, self.wp, self.r]
    }

    pub fn from_array(y: f64, s: [f64; 3]) -> Self {
        SimilarityState::new(y, s[0], s[1], s[2])
    }
}

/// Physical data on the core boundary `r = eps t`: velocity `v_tilde*eps`,
/// velocity gradient `v1_tilde / t` and density `d1 / (eps t^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalInit {
    pub v_tilde: f64,
    pub v1_tilde: f64,
    pub d1: f64,
    pub eps: f64,
}

impl PhysicalInit {
    pub fn new(v_tilde: f64, v1_tilde: f64, d1: f64, eps: f64) -> Self {
        PhysicalInit { v_tilde, v1_tilde, d1, eps }
    }

    /// Field-level validation; returns the offending field name on failure.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let check = |name: &'static str, v: f64, ok: bool, want: &str| {
            if v.is_finite() && ok {
                Ok(())
            } else {
                Err((name, format!("{name} must be {want}, got {v}")))
            }
        };
        check("v_tilde", self.v_tilde, self.v_tilde < 0.0, "negative")?;
        check("v1_tilde", self.v1_tilde, self.v1_tilde < 0.0, "negative")?;
        check("d1", self.d1, self.d1 > 0.0, "positive")?;
        check("eps", self.eps, self.eps > 0.0, "positive")?;
        Ok(())
    }

    /// `v1_tilde - v_tilde >= 0` is accepted but lies outside the range the
    /// monotonicity results cover (`W'(eps) >= 0`).
    pub fn outside_analysis_range(&self) -> bool {
        self.v1_tilde - self.v_tilde >= 0.0
    }
}

/// `(dW/dy, dW'/dy, dR/dy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeTriple {
    pub dw: f64,
    pub dwp: f64,
    pub dr: f64,
}

impl DerivativeTriple {
    pub fn as_array(&self) -> [f64; 3] {
        [self.dw, self.dwp, self.dr]
    }
}

/// Explicit right-hand side of the similarity system:
///
/// ```text
/// R'  = -R (W'y + 3W + 1) / (W y)
/// W'' = [ (Wy)^2 (W'y + W + 1 - R)/2 + (W'y + 1)^2 + 4W + 3W^2
///         - A (W'y + 3W + 1)/2 ] / (W y^2)
/// ```
pub fn rhs(state: &SimilarityState, pressure: PressureFlag) -> Result<DerivativeTriple> {
    let SimilarityState { y, w, wp, r } = *state;
    if w.abs() <= BREAKDOWN_THRESHOLD || y <= BREAKDOWN_THRESHOLD {
        return Err(Error::SingularEvaluation { y, w_abs: w.abs() });
    }
    let wy = w * y;
    let wpy = wp * y;
    let h = wpy + 3.0 * w + 1.0;
    let dr = -r * h / wy;
    let num = 0.5 * wy * wy * (wpy + w + 1.0 - r) + (wpy + 1.0) * (wpy + 1.0) + 4.0 * w + 3.0 * w * w
        - 0.5 * pressure.a() * h;
    let dwp = num / (w * y * y);
    Ok(DerivativeTriple { dw: wp, dwp, dr })
}

/// Boundary data to ODE initial values at `y = eps`:
/// `W = v - 1`, `W' = (v1 - v)/eps`, `R = d1/eps`.
pub fn map_initial(init: &PhysicalInit) -> SimilarityState {
    SimilarityState {
        y: init.eps,
        w: init.v_tilde - 1.0,
        wp: (init.v1_tilde - init.v_tilde) / init.eps,
        r: init.d1 / init.eps,
    }
}

/// `H = W'y + 3W + 1`; negative `H` keeps `W` below `-1/3`.
pub fn h_value(state: &SimilarityState) -> f64 {
    state.wp * state.y + 3.0 * state.w + 1.0
}

/// Physical fields at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalPoint {
    pub rho: f64,
    pub u: f64,
    pub r: f64,
}

pub fn reconstruct(state: &SimilarityState, t: f64) -> Result<PhysicalPoint> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    Ok(PhysicalPoint { rho: state.r / (t * t), u: state.v(), r: state.y * t })
}

/// Enclosed-mass factor `g_ss = -R W y^3`, so that `g(r, t) = t g_ss(r/t)`.
pub fn gravity_similarity(state: &SimilarityState) -> f64 {
    -state.r * state.w * state.y.powi(3)
}

/// `core + int_{y0}^{y} R(a) a^2 da` by trapezoid over the trace samples,
/// `y0` being the first sample. The final partial interval uses the trace's
/// interpolant.
pub fn gravity_quadrature(trace: &SolutionTrace, y: f64, core: f64) -> Result<f64> {
    let (lo, hi) = trace.span();
    if !(y >= lo && y <= hi) {
        return Err(Error::OutOfRange { y, lo, hi });
    }
    let samples = &trace.samples;
    let f = |s: &SimilarityState| s.r * s.y * s.y;
    let mut acc = 0.0;
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.y <= y {
            acc += 0.5 * (b.y - a.y) * (f(a) + f(b));
        } else {
            if a.y < y {
                let end = trace.interpolate(y)?;
                acc += 0.5 * (y - a.y) * (f(a) + f(&end));
            }
            break;
        }
    }
    Ok(core + acc)
}

/// The core term that makes `gravity_quadrature` agree with
/// `gravity_similarity`: the enclosed-mass factor at the first sample.
pub fn trace_core_gravity(trace: &SolutionTrace) -> f64 {
    trace.samples.first().map(gravity_similarity).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Implicit form, both equations moved to one side.
    fn implicit_residual(s: &SimilarityState, d: &DerivativeTriple, a: f64) -> (f64, f64) {
        let (y, w, wp, r) = (s.y, s.w, s.wp, s.r);
        let e1 = d.dr * w * y + r * (wp * y + 3.0 * w + 1.0);
        let e2 = d.dwp * w * y * y
            - (0.5 * (w * y).powi(2) * (wp * y + w + 1.0 - r) + (wp * y + 1.0).powi(2) + 4.0 * w + 3.0 * w * w
                - 0.5 * a * (wp * y + 3.0 * w + 1.0));
        (e1, e2)
    }

    #[test]
    fn exact_isothermal_point() {
        let s = SimilarityState::new(2.0, -1.0, 0.0, 0.5);
        let d = rhs(&s, PressureFlag::Isothermal).unwrap();
        assert_eq!(d.dw, 0.0);
        assert_eq!(d.dwp, 0.0);
        assert_eq!(d.dr, -0.5);
    }

    #[test]
    fn vacuum_has_no_density_change() {
        let s = SimilarityState::new(1.0, -2.0, 0.0, 0.0);
        let d = rhs(&s, PressureFlag::Vanishing).unwrap();
        assert_eq!(d.dr, 0.0);
    }

    #[test]
    fn reference_start_derivatives() {
        let s = SimilarityState::new(0.01, -5.0, -100.0, 500.0);
        let d = rhs(&s, PressureFlag::Vanishing).unwrap();
        assert_relative_eq!(d.dr, -150000.0, max_relative = 1e-12);
        assert_relative_eq!(d.dwp, -108737.5, max_relative = 1e-12);
        // closed form for R'(eps) in terms of the boundary data
        let (v, v1, d1, eps) = (-4.0, -5.0, 5.0, 0.01);
        let closed = -(d1 / eps) * (v1 + 2.0 * (v - 1.0)) / ((v - 1.0) * eps);
        assert_relative_eq!(d.dr, closed, max_relative = 1e-12);
    }

    #[test]
    fn singular_at_zero_w() {
        let s = SimilarityState::new(1.0, 0.0, 0.3, 1.0);
        assert!(matches!(rhs(&s, PressureFlag::Isothermal), Err(Error::SingularEvaluation { .. })));
        let s = SimilarityState::new(0.0, -1.0, 0.0, 1.0);
        assert!(rhs(&s, PressureFlag::Isothermal).is_err());
    }

    #[test]
    fn map_initial_examples() {
        let s = map_initial(&PhysicalInit::new(-4.0, -5.0, 5.0, 0.01));
        assert_eq!(s.y, 0.01);
        assert_eq!(s.w, -5.0);
        assert_relative_eq!(s.wp, -100.0, max_relative = 1e-14);
        assert_relative_eq!(s.r, 500.0, max_relative = 1e-14);

        let s = map_initial(&PhysicalInit::new(-1.0, -1.0, 1.0, 0.1));
        assert_eq!((s.w, s.wp), (-2.0, 0.0));
        assert_relative_eq!(s.r, 10.0, max_relative = 1e-14);

        let s = map_initial(&PhysicalInit::new(-2.0, -4.0, 2.0, 0.1));
        assert_eq!(s.w, -3.0);
        assert_relative_eq!(s.wp, -20.0, max_relative = 1e-14);
        assert_relative_eq!(s.r, 20.0, max_relative = 1e-14);
    }

    #[test]
    fn init_validation_names_field() {
        let bad = PhysicalInit::new(-4.0, -5.0, 5.0, 0.0);
        assert_eq!(bad.validate().unwrap_err().0, "eps");
        let bad = PhysicalInit::new(1.0, -5.0, 5.0, 0.1);
        assert_eq!(bad.validate().unwrap_err().0, "v_tilde");
        assert!(PhysicalInit::new(-4.0, -3.0, 5.0, 0.01).outside_analysis_range());
        assert!(!PhysicalInit::new(-4.0, -5.0, 5.0, 0.01).outside_analysis_range());
    }

    #[test]
    fn h_examples() {
        assert_eq!(h_value(&SimilarityState::new(1.0, -1.0, 0.0, 0.0)), -2.0);
        assert_eq!(h_value(&SimilarityState::new(1.0, -1.0 / 3.0, 0.0, 0.0)), 0.0);
        assert_relative_eq!(h_value(&SimilarityState::new(0.01, -5.0, -100.0, 0.0)), -15.0, max_relative = 1e-14);
    }

    #[test]
    fn reconstruct_examples() {
        let p = reconstruct(&SimilarityState::new(3.7, -1.0, 0.2, 1.0), 0.4).unwrap();
        assert_eq!(p.u, 0.0);
        let p = reconstruct(&SimilarityState::new(0.01, -5.0, -100.0, 500.0), 1.0).unwrap();
        assert_relative_eq!(p.u, -0.04, max_relative = 1e-14);
        assert_eq!((p.rho, p.r), (500.0, 0.01));
        let p = reconstruct(&SimilarityState::new(2.0, -1.0, 0.0, 0.5), 2.0).unwrap();
        assert_eq!((p.u, p.rho, p.r), (0.0, 0.125, 4.0));
        assert!(reconstruct(&SimilarityState::new(1.0, -1.0, 0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn map_then_reconstruct_recovers_boundary_data() {
        let init = PhysicalInit::new(-4.0, -5.0, 5.0, 0.01);
        let p = reconstruct(&map_initial(&init), 1.0).unwrap();
        assert_relative_eq!(p.u, init.v_tilde * init.eps, max_relative = 1e-14);
        assert_relative_eq!(p.rho, init.d1 / init.eps, max_relative = 1e-14);
    }

    #[test]
    fn gravity_similarity_examples() {
        assert_eq!(gravity_similarity(&SimilarityState::new(1.3, -2.0, 0.0, 0.0)), 0.0);
        assert_eq!(gravity_similarity(&SimilarityState::new(1.0, -1.0, 0.0, 2.0)), 2.0);
        assert_relative_eq!(
            gravity_similarity(&SimilarityState::new(3.0, -1.0, 0.0, 2.0 / 9.0)),
            6.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn pressure_flag_serde() {
        let p: PressureFlag = serde_json::from_str("1").unwrap();
        assert_eq!(p, PressureFlag::Isothermal);
        assert!(serde_json::from_str::<PressureFlag>("2").is_err());
        assert_eq!(serde_json::to_string(&PressureFlag::Vanishing).unwrap(), "0");
    }

    proptest::proptest! {
        #[test]
        fn rhs_satisfies_implicit_form(
            y in 1e-3f64..20.0, w in -50.0f64..-1e-3, wp in -100.0f64..100.0, r in 0.0f64..100.0, iso in proptest::bool::ANY
        ) {
            let p = if iso { PressureFlag::Isothermal } else { PressureFlag::Vanishing };
            let s = SimilarityState::new(y, w, wp, r);
            let d = rhs(&s, p).unwrap();
            let d2 = rhs(&s, p).unwrap();
            proptest::prop_assert_eq!(d, d2);
            let (e1, e2) = implicit_residual(&s, &d, p.a());
            let scale1 = (d.dr * w * y).abs() + (r * (wp * y + 3.0 * w + 1.0)).abs() + 1e-300;
            let scale2 = (d.dwp * w * y * y).abs() + 0.5 * (w * y).powi(2) * (wp * y + w + 1.0 - r).abs()
                + (wp * y + 1.0).powi(2) + (4.0 * w).abs() + 3.0 * w * w + (wp * y + 3.0 * w + 1.0).abs() + 1e-300;
            proptest::prop_assert!(e1.abs() / scale1 < 1e-12);
            proptest::prop_assert!(e2.abs() / scale2 < 1e-12);
        }

        #[test]
        fn exact_isothermal_family(y in 1e-2f64..100.0) {
            let s = SimilarityState::new(y, -1.0, 0.0, 2.0 / (y * y));
            let d = rhs(&s, PressureFlag::Isothermal).unwrap();
            proptest::prop_assert!(d.dwp.abs() <= 1e-12 * (1.0 + 1.0 / (y * y)));
            let expect = -4.0 / (y * y * y);
            proptest::prop_assert!((d.dr - expect).abs() <= 1e-13 * expect.abs());
        }
    }
}
