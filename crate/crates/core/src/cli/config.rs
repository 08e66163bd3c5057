//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::inviscid::{InviscidConfig, InviscidState};
use crate::ode::IntegratorConfig;
use crate::pde::PdeConfig;
use crate::selfsim::{map_initial, PhysicalInit, PressureFlag, SimilarityState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Selfsim,
    Invariants,
    ShadowSweep,
    Inviscid,
    Pde,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    Physical(PhysicalInit),
    State(SimilarityState),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InviscidSection {
    pub start: InviscidState,
    #[serde(default)]
    pub config: InviscidConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub pressure: PressureFlag,
    pub init: InitSpec,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub pde: Option<PdeConfig>,
    /// `eps` values for the shadow-core sweep, strictly decreasing.
    #[serde(default)]
    pub sweep: Option<Vec<f64>>,
    #[serde(default)]
    pub inviscid: Option<InviscidSection>,
    /// Check names that decide the exit code; all checks when absent.
    #[serde(default)]
    pub checks: Option<Vec<String>>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("collapsar-out")
}

/// Configuration problem with the offending field, if known.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigError {
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: Some(field.into()), message: message.into() }
    }
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.field {
            Some(field) => write!(f, "{field}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

pub const CHECK_NAMES: &[&str] = &[
    "H_negative",
    "W_bound",
    "R_monotone",
    "decay_bound",
    "gap",
    "asymptotics",
    "W_below_minus_one_until_yd",
    "exact_isothermal",
    "ode_residual",
    "scaling_slopes",
    "inviscid_admissibility",
    "sonic_lp",
    "pde_stationarity",
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { field: None, message: format!("cannot read {}: {e}", path.display()) })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| ConfigError { field: None, message: format!("invalid config: {e}") })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match &self.init {
            InitSpec::Physical(p) => {
                p.validate().map_err(|(field, msg)| ConfigError::new(format!("init.physical.{field}"), msg))?
            }
            InitSpec::State(s) => s.validate().map_err(|e| ConfigError::new("init.state", e.to_string()))?,
        }
        let start = self.start();
        if !(self.integrator.y_end > start.y) {
            return Err(ConfigError::new("integrator.y_end", format!("must exceed the start y={}", start.y)));
        }
        if !(self.integrator.rel_tol > 0.0 && self.integrator.abs_tol > 0.0) {
            return Err(ConfigError::new("integrator", "tolerances must be positive"));
        }
        let needs = |on: bool, present: bool, field: &str| {
            if on && !present {
                Err(ConfigError::new(field, format!("section required by mode {:?}", self.mode)))
            } else {
                Ok(())
            }
        };
        needs(self.mode == Mode::Pde, self.pde.is_some(), "pde")?;
        needs(self.mode == Mode::ShadowSweep, self.sweep.is_some(), "sweep")?;
        needs(self.mode == Mode::Inviscid, self.inviscid.is_some(), "inviscid")?;
        if let Some(p) = &self.pde {
            p.validate().map_err(|e| ConfigError::new("pde", e.to_string()))?;
        }
        if let Some(eps) = &self.sweep {
            if eps.len() < 3 || eps.windows(2).any(|p| !(p[1] < p[0])) || eps.iter().any(|e| !(*e > 0.0)) {
                return Err(ConfigError::new("sweep", "need at least 3 positive, strictly decreasing eps values"));
            }
            if eps[0] / eps[eps.len() - 1] < 100.0 {
                return Err(ConfigError::new("sweep", "eps values must span at least two decades"));
            }
        }
        if let Some(checks) = &self.checks {
            if let Some(bad) = checks.iter().find(|c| !CHECK_NAMES.contains(&c.as_str())) {
                return Err(ConfigError::new("checks", format!("unknown check {bad:?}")));
            }
        }
        Ok(())
    }

    pub fn start(&self) -> SimilarityState {
        match self.init {
            InitSpec::Physical(p) => map_initial(&p),
            InitSpec::State(s) => s,
        }
    }

    pub fn physical(&self) -> Option<PhysicalInit> {
        match self.init {
            InitSpec::Physical(p) => Some(p),
            InitSpec::State(_) => None,
        }
    }

    pub fn runs(&self, mode: Mode) -> bool {
        match self.mode {
            Mode::All => match mode {
                Mode::Selfsim | Mode::Invariants => true,
                Mode::ShadowSweep => self.sweep.is_some(),
                Mode::Inviscid => self.inviscid.is_some(),
                Mode::Pde => self.pde.is_some(),
                Mode::All => true,
            },
            Mode::Invariants => matches!(mode, Mode::Selfsim | Mode::Invariants),
            m => m == mode || mode == Mode::Selfsim,
        }
    }

    pub fn requested(&self, check: &str) -> bool {
        self.checks.as_ref().is_none_or(|c| c.iter().any(|x| x == check))
    }
}
