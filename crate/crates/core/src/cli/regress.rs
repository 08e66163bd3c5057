//! Golden-case regression: re-run stored cases and diff event locations,
//! termination and check outcomes against stored expectations.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::InitSpec;
use super::{trace_check, Exit};
use crate::error::Result;
use crate::ode::{integrate_with, IntegratorConfig};
use crate::selfsim::{map_initial, rhs, DerivativeTriple, PressureFlag, SimilarityState};
use crate::trace::Termination;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub termination: Termination,
    /// First location of each event, keyed by label (`y_c`, `z`, ...).
    pub events: BTreeMap<String, f64>,
    pub checks: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCase {
    pub name: String,
    pub pressure: PressureFlag,
    pub init: InitSpec,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    pub expected: Expected,
    /// Relative tolerance on event locations.
    #[serde(default = "default_event_tol")]
    pub event_rel_tol: f64,
}

fn default_event_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub name: String,
    pub passed: bool,
    pub mismatches: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressReport {
    pub exit_code: i32,
    pub cases: Vec<CaseReport>,
    pub error: Option<String>,
}

impl RegressReport {
    fn fail(msg: String) -> Self {
        RegressReport { exit_code: Exit::ConfigError.code(), cases: Vec::new(), error: Some(msg) }
    }
}

/// Re-runs every `*.json` case in `dir` with the production right-hand side.
pub fn run_corpus(dir: &Path) -> RegressReport {
    run_corpus_with(dir, &|s: &SimilarityState, p: PressureFlag| rhs(s, p))
}

/// As [`run_corpus`], with the right-hand side replaced by `f`.
pub fn run_corpus_with(
    dir: &Path,
    f: &dyn Fn(&SimilarityState, PressureFlag) -> Result<DerivativeTriple>,
) -> RegressReport {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) => return RegressReport::fail(format!("cannot read corpus {}: {e}", dir.display())),
    };
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return RegressReport::fail(format!("corpus {} holds no cases", dir.display()));
    }
    let mut cases = Vec::new();
    for path in paths {
        let case: GoldenCase = match std::fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
        {
            Ok(c) => c,
            Err(e) => return RegressReport::fail(format!("{}: {e}", path.display())),
        };
        cases.push(run_case(&case, f));
    }
    let ok = cases.iter().all(|c| c.passed);
    RegressReport { exit_code: if ok { Exit::Ok.code() } else { Exit::CheckFailure.code() }, cases, error: None }
}

pub fn run_case(
    case: &GoldenCase,
    f: &dyn Fn(&SimilarityState, PressureFlag) -> Result<DerivativeTriple>,
) -> CaseReport {
    let start = match case.init {
        InitSpec::Physical(p) => map_initial(&p),
        InitSpec::State(s) => s,
    };
    let mut mismatches = Vec::new();
    let p = case.pressure;
    let trace = match integrate_with(start, p, &case.integrator, |s| f(s, p)) {
        Ok(t) => t,
        Err(e) => {
            return CaseReport {
                name: case.name.clone(),
                passed: false,
                mismatches: vec![format!("integration error: {e}")],
            };
        }
    };
    if trace.termination != case.expected.termination {
        mismatches.push(format!("termination {:?}, expected {:?}", trace.termination, case.expected.termination));
    }
    let mut found: BTreeMap<String, f64> = BTreeMap::new();
    for e in &trace.events {
        found.entry(e.kind.label().to_string()).or_insert(e.y_star);
    }
    for (label, want) in &case.expected.events {
        match found.get(label) {
            Some(got) if ((got - want) / want).abs() <= case.event_rel_tol => {}
            Some(got) => mismatches.push(format!("event {label} at {got:.17e}, expected {want:.17e}")),
            None => mismatches.push(format!("event {label} missing, expected at {want:.17e}")),
        }
    }
    for label in found.keys().filter(|k| !case.expected.events.contains_key(*k)) {
        mismatches.push(format!("unexpected event {label} at {:.17e}", found[label]));
    }
    for (name, want) in &case.expected.checks {
        match trace_check(name, &trace) {
            Some(rep) if rep.passed == *want => {}
            Some(rep) => mismatches.push(format!("check {name} passed={}, expected {want}", rep.passed)),
            None => mismatches.push(format!("unknown check {name}")),
        }
    }
    CaseReport { name: case.name.clone(), passed: mismatches.is_empty(), mismatches }
}
