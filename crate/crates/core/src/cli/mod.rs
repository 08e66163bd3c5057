//! Batch runs driven by JSON configuration files.
//!
//! Exit codes: 0 when every requested check passes, 2 on a check failure,
//! 3 on numerical breakdown and 4 on configuration or I/O errors. Every
//! error is also written to `diagnostics.json` when the output directory is
//! usable.

pub mod config;
pub mod output;
pub mod regress;
pub mod svg;

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::invariants::{self, CheckReport};
use crate::inviscid::{integrate_inviscid, SonicClass};
use crate::ode::{self, integrate};
use crate::par::{self, Execution};
use crate::pde;
use crate::shadow::{self, admissibility_scaling, ScalingReport};
use crate::trace::{SolutionTrace, Termination};

pub use config::{ConfigError, InitSpec, Mode, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Exit {
    Ok = 0,
    CheckFailure = 2,
    Breakdown = 3,
    ConfigError = 4,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub jobs: Option<usize>,
    pub output: Option<PathBuf>,
    pub y_end: Option<f64>,
    pub no_plots: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit: Exit,
    pub output_dir: Option<PathBuf>,
    pub checks: Vec<CheckReport>,
    pub message: Option<String>,
}

/// Tolerances of the exact-profile check.
pub const EXACT_W_TOL: f64 = 1e-8;
pub const EXACT_R_TOL: f64 = 1e-6;
/// Bound on the scaled finite-difference residual of a trace.
pub const ODE_RESIDUAL_TOL: f64 = 1e-6;
pub const SLOPE_TOL: f64 = 0.1;
pub const FIT_RESIDUAL_TOL: f64 = 0.05;
/// Allowed growth of the PDE deviation over its baseline.
pub const PDE_GROWTH_FACTOR: f64 = 5.0;

fn pass_fail(name: &str, passed: bool, margin: f64, note: String) -> CheckReport {
    CheckReport {
        name: name.into(),
        passed,
        first_violation: None,
        margin_min: margin,
        skipped: false,
        note: Some(note),
        marker_y: None,
    }
}

/// `max |W + 1|` and `max |R y^2/2 - 1|` over the trace.
pub fn exact_isothermal_errors(trace: &SolutionTrace) -> (f64, f64) {
    trace.samples.iter().fold((0.0_f64, 0.0_f64), |(a, b), s| {
        let exact = 2.0 / (s.y * s.y);
        (a.max((s.w + 1.0).abs()), b.max(((s.r - exact) / exact).abs()))
    })
}

/// Evaluates a check that needs only the similarity trace.
pub fn trace_check(name: &str, trace: &SolutionTrace) -> Option<CheckReport> {
    let skipped = |e: crate::Error| CheckReport {
        name: name.into(),
        passed: true,
        first_violation: None,
        margin_min: f64::INFINITY,
        skipped: true,
        note: Some(e.to_string()),
        marker_y: None,
    };
    Some(match name {
        "H_negative" => invariants::check_h_negative(trace),
        "W_bound" => invariants::check_w_bound(trace),
        "R_monotone" => invariants::check_r_monotone(trace),
        "decay_bound" => invariants::check_decay_bound(trace).unwrap_or_else(skipped),
        "gap" => {
            let from = invariants::gap_onset(trace).unwrap_or(trace.first().y);
            invariants::check_gap(trace, from).unwrap_or_else(skipped)
        }
        "asymptotics" => {
            invariants::check_asymptotics(trace, &invariants::AsymptoticTolerances::default()).unwrap_or_else(skipped)
        }
        "W_below_minus_one_until_yd" => invariants::check_w_below_minus_one_until_yd(trace),
        "exact_isothermal" => {
            let (ew, er) = exact_isothermal_errors(trace);
            let margin = (1.0 - ew / EXACT_W_TOL).min(1.0 - er / EXACT_R_TOL);
            pass_fail(
                name,
                ew <= EXACT_W_TOL && er <= EXACT_R_TOL,
                margin,
                format!("max|W+1|={ew:.3e}, max rel R error={er:.3e}"),
            )
        }
        "ode_residual" => match ode::residual(trace, trace.pressure) {
            Ok(r) => {
                pass_fail(name, r <= ODE_RESIDUAL_TOL, 1.0 - r / ODE_RESIDUAL_TOL, format!("scaled residual {r:.3e}"))
            }
            Err(e) => skipped(e),
        },
        _ => return None,
    })
}

const TRACE_DEFAULT_CHECKS: &[&str] =
    &["H_negative", "W_bound", "R_monotone", "decay_bound", "gap", "asymptotics", "W_below_minus_one_until_yd"];

struct Failure {
    exit: Exit,
    kind: &'static str,
    field: Option<String>,
    message: String,
}

impl Failure {
    fn config(e: ConfigError) -> Self {
        Failure { exit: Exit::ConfigError, kind: "config", field: e.field, message: e.message }
    }
    fn io(e: std::io::Error, what: &str) -> Self {
        Failure { exit: Exit::ConfigError, kind: "io", field: None, message: format!("{what}: {e}") }
    }
    fn breakdown(message: String) -> Self {
        Failure { exit: Exit::Breakdown, kind: "breakdown", field: None, message }
    }
}

fn write_diagnostics(dir: Option<&Path>, f: &Failure) {
    let v = json!({ "exit_code": f.exit.code(), "kind": f.kind, "field": f.field, "message": f.message });
    match dir {
        Some(d) if std::fs::create_dir_all(d).is_ok() && output::write_json(d, "diagnostics.json", &v).is_ok() => {}
        _ => eprintln!("{v}"),
    }
}

/// Loads `path` and runs it. Never panics on bad input.
pub fn run(path: &Path, opts: &RunOptions) -> RunOutcome {
    match RunConfig::load(path) {
        Ok(cfg) => run_config(cfg, opts),
        Err(e) => {
            let f = Failure::config(e);
            write_diagnostics(opts.output.as_deref(), &f);
            RunOutcome { exit: f.exit, output_dir: opts.output.clone(), checks: Vec::new(), message: Some(f.message) }
        }
    }
}

pub fn run_config(mut cfg: RunConfig, opts: &RunOptions) -> RunOutcome {
    if let Some(dir) = &opts.output {
        cfg.output_dir = dir.clone();
    }
    if let Some(y) = opts.y_end {
        cfg.integrator.y_end = y;
    }
    let dir = cfg.output_dir.clone();
    let mut checks = Vec::new();
    let result = execute(&cfg, opts, &mut checks);
    let (exit, message) = match result {
        Ok(()) => (if checks.iter().all(|c| c.passed) { Exit::Ok } else { Exit::CheckFailure }, None),
        Err(f) => {
            write_diagnostics(Some(&dir), &f);
            (f.exit, Some(f.message))
        }
    };
    let summary =
        json!({ "exit_code": exit.code(), "mode": cfg.mode, "checks_passed": checks.iter().all(|c| c.passed) });
    let _ = output::write_json(&dir, "run.json", &summary);
    RunOutcome { exit, output_dir: Some(dir), checks, message }
}

fn execute(cfg: &RunConfig, opts: &RunOptions, checks: &mut Vec<CheckReport>) -> Result<(), Failure> {
    cfg.validate().map_err(Failure::config)?;
    for name in cfg.checks.iter().flatten() {
        let needs = match name.as_str() {
            "scaling_slopes" | "inviscid_admissibility" => Some(("sweep", cfg.runs(Mode::ShadowSweep))),
            "sonic_lp" => Some(("inviscid", cfg.runs(Mode::Inviscid))),
            "pde_stationarity" => Some(("pde", cfg.runs(Mode::Pde))),
            _ => None,
        };
        if let Some((section, false)) = needs {
            return Err(Failure::config(ConfigError {
                field: Some("checks".into()),
                message: format!("check {name} needs the {section} stage to run"),
            }));
        }
    }
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(e, &format!("cannot create {}", dir.display())))?;
    if let Some(j) = opts.jobs {
        par::set_threads(j);
    }
    let exec = if opts.jobs == Some(1) { Execution::Sequential } else { Execution::Parallel };
    let io = |e: std::io::Error| Failure::io(e, "cannot write artifact");

    let trace = integrate(cfg.start(), cfg.pressure, &cfg.integrator)
        .map_err(|e| Failure::config(ConfigError { field: Some("init".into()), message: e.to_string() }))?;
    output::write(dir, "trace.csv", &output::trace_csv(&trace)).map_err(io)?;
    output::write_json(dir, "events.json", &output::events_json(&trace)).map_err(io)?;
    if !opts.no_plots {
        output::write(dir, "plot.svg", &plot(&trace)).map_err(io)?;
    }
    if trace.termination != Termination::ReachedEnd {
        return Err(Failure::breakdown(format!(
            "integration stopped at y={} ({:?})",
            trace.last().y,
            trace.termination
        )));
    }

    if cfg.runs(Mode::Invariants) {
        let names: Vec<&str> = match &cfg.checks {
            Some(c) => c.iter().map(String::as_str).collect(),
            None => TRACE_DEFAULT_CHECKS.to_vec(),
        };
        checks.extend(names.iter().filter_map(|n| trace_check(n, &trace)));
    }

    if cfg.runs(Mode::ShadowSweep) {
        let eps = cfg.sweep.as_ref().expect("validated");
        let base = cfg.physical().ok_or_else(|| {
            Failure::config(ConfigError {
                field: Some("init".into()),
                message: "the sweep needs physical init data".into(),
            })
        })?;
        let rep = admissibility_scaling(&base, eps, cfg.pressure, &cfg.integrator, exec)
            .map_err(|e| Failure::config(ConfigError { field: Some("sweep".into()), message: e.to_string() }))?;
        output::write(dir, "scaling.csv", &rep.to_csv()).map_err(io)?;
        output::write_json(dir, "scaling.json", &serde_json::to_value(&rep).expect("serializable")).map_err(io)?;
        if let Some(f) = &rep.failure {
            return Err(Failure::breakdown(format!("sweep aborted at {f}")));
        }
        for name in ["scaling_slopes", "inviscid_admissibility"] {
            if cfg.requested(name) {
                checks.push(sweep_check(name, &rep));
            }
        }
    }

    if cfg.runs(Mode::Inviscid) {
        let sec = cfg.inviscid.expect("validated");
        let (tr, sonic) = integrate_inviscid(sec.start, cfg.pressure, &sec.config)
            .map_err(|e| Failure::config(ConfigError { field: Some("inviscid".into()), message: e.to_string() }))?;
        output::write(dir, "inviscid_trace.csv", &output::inviscid_csv(&tr)).map_err(io)?;
        output::write_json(dir, "sonic.json", &json!({ "stop": tr.stop, "report": sonic })).map_err(io)?;
        if cfg.checks.as_ref().is_some_and(|c| c.iter().any(|n| n == "sonic_lp")) {
            let lp = sonic.is_some_and(|s| s.classification == SonicClass::LarsonPenstonCandidate);
            let note = match sonic {
                Some(s) => format!("y_bar={:.6}, lp_defect={:.3e}", s.y_bar, s.lp_defect),
                None => format!("no sonic point ({:?})", tr.stop),
            };
            checks.push(pass_fail("sonic_lp", lp, if lp { 1.0 } else { 0.0 }, note));
        }
    }

    if cfg.runs(Mode::Pde) {
        let pcfg = pde::PdeConfig { execution: exec, ..cfg.pde.expect("validated") };
        let ev = pde::evolve(&trace, &pcfg, &[0.0, pcfg.tau_end]).map_err(|e| match e {
            crate::Error::OutOfRange { .. } | crate::Error::InvalidInput(_) => {
                Failure::config(ConfigError { field: Some("pde".into()), message: e.to_string() })
            }
            other => Failure::breakdown(other.to_string()),
        })?;
        output::write(dir, "pde_deviation.csv", &ev.history_csv()).map_err(io)?;
        for (tau, csv) in &ev.snapshots {
            output::write(dir, &format!("pde_snapshots/tau_{tau:.4}.csv"), csv).map_err(io)?;
        }
        let fin = ev.final_deviation();
        let ratio = fin.l2 / ev.baseline_l2;
        output::write_json(
            dir,
            "pde.json",
            &json!({ "steps": ev.steps, "clips": ev.field.clips, "baseline_l2": ev.baseline_l2, "final": fin, "growth": ratio }),
        )
        .map_err(io)?;
        if cfg.requested("pde_stationarity") {
            checks.push(pass_fail(
                "pde_stationarity",
                ratio <= PDE_GROWTH_FACTOR,
                1.0 - ratio / PDE_GROWTH_FACTOR,
                format!(
                    "L2 deviation {:.3e} at tau={}, baseline {:.3e}, clips {}",
                    fin.l2, fin.tau, ev.baseline_l2, ev.field.clips
                ),
            ));
        }
    }

    let all = checks.iter().all(|c| c.passed);
    let v = json!({ "passed": all, "checks": checks });
    output::write_json(dir, "checks.json", &v).map_err(io)?;
    Ok(())
}

/// Checks over an `eps` sweep: fitted slopes against `+1, -1, +2, +1` and
/// boundedness of `eps rho_1 u_1^2`.
pub fn sweep_check(name: &str, rep: &ScalingReport) -> CheckReport {
    let Some(f) = &rep.fits else {
        return pass_fail(name, false, f64::NEG_INFINITY, "sweep incomplete".into());
    };
    match name {
        "scaling_slopes" => {
            let fits = [
                (&f.u1, 1.0, "u1"),
                (&f.rho1, -1.0, "rho1"),
                (&f.mass_residual, 2.0, "mass"),
                (&f.momentum_residual, 1.0, "momentum"),
            ];
            let mut margin = f64::INFINITY;
            let mut notes = Vec::new();
            for (fit, want, label) in fits {
                margin = margin.min(SLOPE_TOL - (fit.slope - want).abs()).min(FIT_RESIDUAL_TOL - fit.fit_residual);
                notes.push(format!("{label} slope {:.4}", fit.slope));
            }
            pass_fail(name, margin > 0.0, margin, notes.join(", "))
        }
        _ => {
            let eps: Vec<f64> = rep.rows.iter().map(|r| r.eps).collect();
            let vals: Vec<f64> = rep.rows.iter().map(|r| r.eps * r.rho1 * r.u1 * r.u1).collect();
            let ok = shadow::bounded_across(&eps, &vals, SLOPE_TOL);
            let listed: Vec<String> = vals.iter().map(|v| format!("{v:.3e}")).collect();
            pass_fail(name, ok, if ok { 1.0 } else { 0.0 }, format!("eps rho1 u1^2 = [{}]", listed.join(", ")))
        }
    }
}

/// `W`, `W'` and `R` against `y` on a log axis.
pub fn plot(trace: &SolutionTrace) -> String {
    let x: Vec<f64> = trace.samples.iter().map(|s| s.y).collect();
    let series = [
        svg::Series { label: "W", values: trace.samples.iter().map(|s| s.w).collect(), color: "#1f77b4" },
        svg::Series { label: "W'", values: trace.samples.iter().map(|s| s.wp).collect(), color: "#2ca02c" },
        svg::Series { label: "R", values: trace.samples.iter().map(|s| s.r).collect(), color: "#d62728" },
    ];
    let a = trace.pressure.a();
    let title = format!("similarity profile, A = {a}, y0 = {}", trace.first().y);
    svg::panels(&title, "y", &x, &series)
}

/// Machine-readable summary of a trace, used by reports and regression.
pub fn trace_summary(trace: &SolutionTrace) -> Value {
    let mut events = serde_json::Map::new();
    for e in &trace.events {
        events.entry(e.kind.label()).or_insert(json!(e.y_star));
    }
    json!({ "termination": trace.termination, "events": events, "samples": trace.len() })
}
