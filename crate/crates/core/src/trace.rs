use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selfsim::{rhs, PressureFlag, SimilarityState};

/// Sign-change events along a similarity profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    /// `W''` rises through zero: end of the initial concave stretch (`y_c`).
    InflectionDown,
    /// `W'` rises through zero: minimum of `W` (`z`).
    VelocityMin,
    /// `W''` falls through zero after the minimum (`y_d`).
    InflectionUp,
    /// `W` rises through `-1` (`y_e`).
    CrossMinusOne,
    /// `W'` falls through zero after the minimum (`y_f`).
    WpSignChange,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::InflectionDown => "y_c",
            EventKind::VelocityMin => "z",
            EventKind::InflectionUp => "y_d",
            EventKind::CrossMinusOne => "y_e",
            EventKind::WpSignChange => "y_f",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: EventKind,
    pub y_star: f64,
    pub state_at: SimilarityState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    ReachedEnd,
    BreakdownWZero,
    StepFailure,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// Smallest step size ever attempted, rejected attempts included.
    pub h_min_attempted: f64,
}

/// Integrated similarity profile: samples at strictly increasing `y`,
/// detected events and the reason integration stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionTrace {
    pub samples: Vec<SimilarityState>,
    pub pressure: PressureFlag,
    pub events: Vec<EventRecord>,
    pub termination: Termination,
    #[serde(default)]
    pub stats: IntegrationStats,
}

impl SolutionTrace {
    /// Trace built from given samples, e.g. synthetic or closed-form profiles.
    pub fn from_samples(samples: Vec<SimilarityState>, pressure: PressureFlag) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Precondition("trace needs at least one sample".into()));
        }
        if samples.windows(2).any(|p| !(p[1].y > p[0].y)) {
            return Err(Error::Precondition("sample y must be strictly increasing".into()));
        }
        Ok(SolutionTrace {
            samples,
            pressure,
            events: Vec::new(),
            termination: Termination::ReachedEnd,
            stats: IntegrationStats::default(),
        })
    }

    /// Closed-form isothermal profile `W = -1`, `R = 2/y^2` sampled at `ys`.
    pub fn exact_isothermal(ys: &[f64]) -> Result<Self> {
        let samples = ys.iter().map(|&y| SimilarityState::new(y, -1.0, 0.0, 2.0 / (y * y))).collect();
        Self::from_samples(samples, PressureFlag::Isothermal)
    }

    pub fn span(&self) -> (f64, f64) {
        (self.samples[0].y, self.samples[self.samples.len() - 1].y)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &SimilarityState {
        &self.samples[0]
    }

    pub fn last(&self) -> &SimilarityState {
        &self.samples[self.samples.len() - 1]
    }

    pub fn event(&self, kind: EventKind) -> Option<&EventRecord> {
        self.events.iter().find(|e| e.kind == kind)
    }

    pub fn ensure_complete(&self) -> Result<()> {
        match self.termination {
            Termination::ReachedEnd => Ok(()),
            other => Err(Error::Integration { y: self.last().y, reason: format!("{other:?}") }),
        }
    }

    /// Cubic Hermite interpolation between samples, using the system
    /// right-hand side for the node derivatives. Falls back to linear
    /// interpolation where the right-hand side is singular.
    pub fn interpolate(&self, y: f64) -> Result<SimilarityState> {
        let (lo, hi) = self.span();
        if !(y >= lo && y <= hi) {
            return Err(Error::OutOfRange { y, lo, hi });
        }
        let idx = self.samples.partition_point(|s| s.y < y);
        if idx < self.samples.len() && self.samples[idx].y == y {
            return Ok(self.samples[idx]);
        }
        let a = &self.samples[idx - 1];
        let b = &self.samples[idx];
        let h = b.y - a.y;
        let s = (y - a.y) / h;
        let (va, vb) = (a.as_array(), b.as_array());
        let out = match (rhs(a, self.pressure), rhs(b, self.pressure)) {
            (Ok(da), Ok(db)) => {
                let (da, db) = (da.as_array(), db.as_array());
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                std::array::from_fn(|k| h00 * va[k] + h10 * h * da[k] + h01 * vb[k] + h11 * h * db[k])
            }
            _ => std::array::from_fn(|k| va[k] + s * (vb[k] - va[k])),
        };
        Ok(SimilarityState::from_array(y, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_monotone() {
        let s = SimilarityState::new(1.0, -1.0, 0.0, 2.0);
        assert!(SolutionTrace::from_samples(vec![s, s], PressureFlag::Isothermal).is_err());
        assert!(SolutionTrace::from_samples(vec![], PressureFlag::Isothermal).is_err());
    }

    #[test]
    fn hermite_is_accurate_on_exact_profile() {
        let ys: Vec<f64> = (0..=100).map(|i| 0.1 * 100f64.powf(i as f64 / 100.0)).collect();
        let tr = SolutionTrace::exact_isothermal(&ys).unwrap();
        for k in 0..500 {
            let y = 0.1 + 9.9 * (k as f64 + 0.37) / 500.0;
            let s = tr.interpolate(y).unwrap();
            let exact = 2.0 / (y * y);
            assert!(((s.r - exact) / exact).abs() < 1e-4, "y={y}");
            assert!((s.w + 1.0).abs() < 1e-14);
        }
        assert!(tr.interpolate(0.05).is_err());
        assert!(tr.interpolate(10.5).is_err());
    }
}
