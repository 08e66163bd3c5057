//! CSV and JSON artifacts.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde_json::{json, Value};

use crate::inviscid::InviscidTrace;
use crate::selfsim::{gravity_similarity, h_value};
use crate::trace::SolutionTrace;

/// Columns `y, W, Wp, R, H, V, rho_ss, g_ss`; `rho_ss = R` and
/// `g_ss = -R W y^3`.
pub fn trace_csv(trace: &SolutionTrace) -> String {
    let mut out = String::from("y,W,Wp,R,H,V,rho_ss,g_ss\n");
    for s in &trace.samples {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.y,
            s.w,
            s.wp,
            s.r,
            h_value(s),
            s.v(),
            s.r,
            gravity_similarity(s)
        );
    }
    out
}

pub fn events_json(trace: &SolutionTrace) -> Value {
    let events: Vec<Value> = trace
        .events
        .iter()
        .map(|e| json!({ "label": e.kind.label(), "kind": e.kind, "y_star": e.y_star, "state": e.state_at }))
        .collect();
    json!({ "termination": trace.termination, "stats": trace.stats, "events": events })
}

pub fn inviscid_csv(trace: &InviscidTrace) -> String {
    let mut out = String::from("y,W,R,sonic_denominator,lp_defect\n");
    for s in &trace.samples {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.y,
            s.w,
            s.r,
            s.sonic_denominator(),
            s.lp_defect()
        );
    }
    out
}

pub fn write(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    write(dir, name, &text)
}
