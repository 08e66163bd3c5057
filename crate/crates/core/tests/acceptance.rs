//! Acceptance criteria, one report line per criterion.
//!
//! Lines go straight to the process stdout so they show up in the test log
//! without `--nocapture`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use collapsar::cli::{self, RunOptions};
use collapsar::invariants::{
    check_decay_bound, check_h_negative, check_r_monotone, check_w_below_minus_one_until_yd, check_w_bound,
};
use collapsar::inviscid::{integrate_inviscid, InviscidConfig, InviscidState, SonicClass};
use collapsar::numeric::loglog_fit;
use collapsar::ode::{fixed_step_rk4, integrate, IntegratorConfig};
use collapsar::par::Execution;
use collapsar::pde::{evolve, PdeConfig};
use collapsar::selfsim::{
    gravity_quadrature, gravity_similarity, map_initial, rhs, trace_core_gravity, PhysicalInit, PressureFlag,
    SimilarityState,
};
use collapsar::shadow::{admissibility_scaling, core_mass, solve_alpha, Beta};
use collapsar::trace::{EventKind, SolutionTrace};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn report(id: u32, name: &str, o: &Outcome, secs: f64) {
    let status = if o.passed { "PASS" } else { "FAIL" };
    let line = format!("[acceptance] {status} {id:>2} {name}: {} ({secs:.2} s)\n", o.detail);
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn reference_init() -> PhysicalInit {
    PhysicalInit::new(-4.0, -5.0, 5.0, 0.01)
}

fn reference_trace(pressure: PressureFlag, y_end: f64) -> SolutionTrace {
    integrate(map_initial(&reference_init()), pressure, &IntegratorConfig::with_end(y_end)).expect("valid input")
}

fn exact_start() -> SimilarityState {
    SimilarityState::new(0.1, -1.0, 0.0, 200.0)
}

fn exact_solution_fidelity() -> Outcome {
    let t0 = Instant::now();
    let cfg = IntegratorConfig { rel_tol: 1e-10, ..IntegratorConfig::with_end(10.0) };
    let tr = integrate(exact_start(), PressureFlag::Isothermal, &cfg).expect("valid input");
    let secs = t0.elapsed().as_secs_f64();
    let w_err = tr.samples.iter().fold(0.0f64, |m, s| m.max((s.w + 1.0).abs()));
    let r_err = tr.samples.iter().fold(0.0f64, |m, s| m.max((s.r * s.y * s.y / 2.0 - 1.0).abs()));
    let reached = tr.last().y == 10.0;
    outcome(
        reached && w_err <= 1e-8 && r_err <= 1e-6 && secs < 1.0,
        format!("max|W+1|={w_err:.2e}, max rel R err={r_err:.2e}, integration {secs:.3} s"),
    )
}

fn integrator_order() -> Outcome {
    let y_end = 1.1;
    let hs = [1e-2, 5e-3, 2.5e-3];
    let errs: Vec<f64> = hs
        .iter()
        .map(|&h| {
            let tr = fixed_step_rk4(exact_start(), PressureFlag::Isothermal, h, y_end).expect("step divides span");
            tr.samples.iter().fold(0.0f64, |m, s| m.max((s.r - 2.0 / (s.y * s.y)).abs() * s.y * s.y / 2.0))
        })
        .collect();
    let slope = loglog_fit(&hs, &errs).slope;
    outcome(
        (3.7..=4.3).contains(&slope),
        format!("errors {:.2e} {:.2e} {:.2e}, slope {slope:.3}", errs[0], errs[1], errs[2]),
    )
}

fn invariant_suite() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for p in [PressureFlag::Vanishing, PressureFlag::Isothermal] {
        let t0 = Instant::now();
        let tr = reference_trace(p, 10.0);
        let secs = t0.elapsed().as_secs_f64();
        let reports =
            [check_h_negative(&tr), check_w_bound(&tr), check_r_monotone(&tr), check_w_below_minus_one_until_yd(&tr)];
        let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
        let ev = |k| tr.event(k).map(|e| e.y_star);
        let ordered = match (ev(EventKind::InflectionDown), ev(EventKind::VelocityMin), ev(EventKind::InflectionUp)) {
            (Some(c), Some(z), Some(d)) => c < z && z < d,
            _ => false,
        };
        ok &= failed.is_empty() && ordered && secs < 5.0 && tr.last().y == 10.0;
        parts.push(format!("A={}: failed {:?}, y_c<z<y_d {ordered}, {secs:.2} s", p.a(), failed));
    }
    outcome(ok, parts.join("; "))
}

fn decay_bound() -> Outcome {
    let tr = reference_trace(PressureFlag::Vanishing, 10.0);
    let rep = check_decay_bound(&tr).expect("trace starts at eps");
    let z = tr.event(EventKind::VelocityMin).map(|e| e.y_star).unwrap_or(f64::INFINITY);
    let eps = tr.first().y;
    let mut n = 0;
    let mut worst = f64::INFINITY;
    for s in tr.samples.iter().filter(|s| s.y > eps && s.y < z) {
        let bound = 500.0 * (s.y / 0.01).powf(-2.8);
        worst = worst.min((bound - s.r) / bound);
        n += 1;
    }
    outcome(
        rep.passed && n > 0 && worst > 0.0,
        format!("{n} samples in (eps, z={z:.6}), min relative slack {worst:.3e}, check_decay_bound {}", rep.passed),
    )
}

fn core_mass_constant() -> Outcome {
    let t0: f64 = 0.7;
    let core = solve_alpha(2.0, Beta::Constant(0.5), t0.powi(-3), t0, 10.0, 0.01).expect("valid core");
    let target = 4.0 * PI / 3.0;
    let err = (0..100)
        .map(|k| t0 + (10.0 - t0) * k as f64 / 99.0)
        .map(|t| ((core_mass(&core, t) - target) / target).abs())
        .fold(0.0f64, f64::max);
    outcome(err <= 1e-14, format!("max relative error {err:.2e} over 100 t in [0.7, 10]"))
}

fn weak_residual_scalings() -> Outcome {
    let t0 = Instant::now();
    let eps = [1e-1, 1e-2, 1e-3, 1e-4];
    let rep = admissibility_scaling(
        &reference_init(),
        &eps,
        PressureFlag::Vanishing,
        &IntegratorConfig::with_end(10.0),
        Execution::Parallel,
    )
    .expect("valid sweep");
    let secs = t0.elapsed().as_secs_f64();
    let Some(f) = rep.fits else {
        return outcome(false, format!("sweep incomplete: {:?}", rep.failure));
    };
    let (m, p, u, r) = (f.mass_residual.slope, f.momentum_residual.slope, f.u1.slope, f.rho1.slope);
    let ok = (m - 2.0).abs() <= 0.1
        && (p - 1.0).abs() <= 0.1
        && (u - 1.0).abs() <= 1e-9
        && (r + 1.0).abs() <= 1e-9
        && secs < 20.0;
    outcome(ok, format!("slopes mass {m:.4}, momentum {p:.4}, u1 {u:.12}, rho1 {r:.12}, {secs:.2} s"))
}

fn inviscid_sonic() -> Outcome {
    let cfg = InviscidConfig { y_end: 2.0, ..Default::default() };
    let run = |r: f64| {
        integrate_inviscid(InviscidState::new(0.5, -1.0, r), PressureFlag::Isothermal, &cfg).expect("valid start")
    };
    let (tr, exact) = run(8.0);
    let (_, perturbed) = run(8.0 * 1.05);
    let end = tr.samples[tr.samples.len() - 1];
    let lp = exact.is_some_and(|s| {
        s.classification == SonicClass::LarsonPenstonCandidate
            && end.sonic_denominator().abs() <= 1e-8
            && end.lp_defect() <= 1e-4
    });
    let blow = perturbed.is_some_and(|s| s.classification == SonicClass::BlowUp);
    outcome(
        lp && blow,
        format!(
            "exact: {}; R x1.05: {}",
            exact.map_or("no sonic point".into(), |s| format!(
                "y_bar={:.8}, |1-(Wy)^2|={:.2e}, |R+2W|={:.2e}, {:?}",
                s.y_bar,
                end.sonic_denominator().abs(),
                end.lp_defect(),
                s.classification
            )),
            perturbed.map_or("no sonic point".into(), |s| format!("y_bar={:.6}, {:?}", s.y_bar, s.classification)),
        ),
    )
}

fn viscous_regularity() -> Outcome {
    let tr = reference_trace(PressureFlag::Vanishing, 10.0);
    let g = |s: &SimilarityState| s.w.abs() * s.y - 1.0;
    let Some(i) = tr.samples.windows(2).position(|p| g(&p[0]) < 0.0 && g(&p[1]) >= 0.0) else {
        return outcome(false, "trace never crosses |W|y = 1".into());
    };
    let y_s = tr.samples[i].y;
    let near: Vec<&SimilarityState> = tr.samples.iter().filter(|s| s.y >= 0.5 * y_s && s.y <= 2.0 * y_s).collect();
    let finite =
        near.iter().all(|s| rhs(s, PressureFlag::Vanishing).is_ok_and(|d| d.dwp.is_finite() && d.dr.is_finite()));
    let h_min = near.windows(2).map(|p| p[1].y - p[0].y).fold(f64::INFINITY, f64::min);
    let global = tr.stats.h_min_attempted;
    outcome(
        finite && h_min >= 1e-8 && tr.last().y == 10.0,
        format!("crossing near y={y_s:.6}, {} samples in [y/2, 2y], W'' and R' finite {finite}, min local step {h_min:.2e}, smallest attempted step overall {global:.2e}", near.len()),
    )
}

fn pde_stationarity() -> Outcome {
    let cfg = PdeConfig::default();
    let exact = integrate(
        SimilarityState::new(0.04, -1.0, 0.0, 2.0 / 0.0016),
        PressureFlag::Isothermal,
        &IntegratorConfig::with_end(5.5),
    )
    .expect("valid input");
    let reference = reference_trace(PressureFlag::Vanishing, 5.5);
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, tr) in [("exact A=1", &exact), ("reference A=0", &reference)] {
        let t0 = Instant::now();
        let ev = evolve(tr, &cfg, &[]).expect("probe runs");
        let secs = t0.elapsed().as_secs_f64();
        let fin = ev.final_deviation();
        let ratio = fin.l2 / ev.baseline_l2;
        ok &= ratio <= 5.0 && secs < 60.0 && fin.tau >= cfg.tau_end - 1e-12;
        parts.push(format!(
            "{name}: D(1)={:.3e}, baseline {:.3e}, ratio {ratio:.3}, {secs:.2} s",
            fin.l2, ev.baseline_l2
        ));
    }
    outcome(ok, parts.join("; "))
}

fn gravity_identity() -> Outcome {
    let mut worst = 0.0f64;
    let mut n = 0;
    for p in [PressureFlag::Vanishing, PressureFlag::Isothermal] {
        let tr = reference_trace(p, 10.0);
        let core = trace_core_gravity(&tr);
        let (lo, hi) = tr.span();
        for k in 1..=20 {
            let y = lo * (hi / lo).powf(k as f64 / 20.0);
            let y = y.min(hi);
            let quad = gravity_quadrature(&tr, y, core).expect("y in span");
            let sim = gravity_similarity(&tr.interpolate(y).expect("y in span"));
            worst = worst.max(((quad - sim) / sim).abs());
            n += 1;
        }
    }
    outcome(worst <= 1e-4, format!("{n} probes on the A=0 and A=1 traces, max relative difference {worst:.2e}"))
}

fn determinism() -> Outcome {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/figure1.json");
    let dir = tempfile::tempdir().expect("temp dir");
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = cli::run(&config, &RunOptions { output: Some(out.clone()), no_plots: true, ..Default::default() });
        (o.exit, std::fs::read(out.join("trace.csv")).unwrap_or_default())
    };
    let (e1, a) = run("first");
    let (e2, b) = run("second");
    outcome(
        !a.is_empty() && a == b,
        format!("exit codes {} and {}, trace.csv {} bytes, identical {}", e1.code(), e2.code(), a.len(), a == b),
    )
}

#[test]
fn acceptance_criteria() {
    type Criterion = (u32, &'static str, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        (1, "exact isothermal solution", exact_solution_fidelity),
        (2, "RK4 convergence order", integrator_order),
        (3, "invariant suite on the reference profile", invariant_suite),
        (4, "decay bound before the velocity minimum", decay_bound),
        (5, "constant core mass", core_mass_constant),
        (6, "weak residual scalings", weak_residual_scalings),
        (7, "inviscid sonic point", inviscid_sonic),
        (8, "viscous trace through |W|y = 1", viscous_regularity),
        (9, "PDE stationarity probe", pde_stationarity),
        (10, "gravity identity", gravity_identity),
        (11, "byte-identical reruns", determinism),
    ];
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        let t0 = Instant::now();
        let o = f();
        report(id, name, &o, t0.elapsed().as_secs_f64());
        if !o.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
