use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use collapsar::ode::{integrate, IntegratorConfig};
use collapsar::par::Execution;
use collapsar::pde::{init_from_trace, stable_dt, step_with, tendency, PdeConfig};
use collapsar::selfsim::{map_initial, PhysicalInit, PressureFlag};
use collapsar::shadow::admissibility_scaling;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn eps_sweep(c: &mut Criterion) {
    let base = PhysicalInit::new(-4.0, -5.0, 5.0, 0.01);
    let eps = [1e-1, 1e-2, 1e-3, 1e-4];
    let cfg = IntegratorConfig::with_end(10.0);
    let mut g = c.benchmark_group("eps_sweep");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| admissibility_scaling(&base, &eps, PressureFlag::Vanishing, &cfg, exec).unwrap())
        });
    }
    g.finish();
}

fn pde_step(c: &mut Criterion) {
    let trace = integrate(
        map_initial(&PhysicalInit::new(-4.0, -5.0, 5.0, 0.01)),
        PressureFlag::Vanishing,
        &IntegratorConfig::with_end(5.5),
    )
    .unwrap();
    let mut g = c.benchmark_group("pde_step");
    for cells in [400, 4000] {
        let field = init_from_trace(&trace, &PdeConfig { cells, ..Default::default() }).unwrap();
        let dt = stable_dt(&field, 0.4);
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(format!("tendency/{name}"), cells), &field, |b, f| {
                b.iter(|| tendency(f, exec))
            });
            g.bench_with_input(BenchmarkId::new(format!("step/{name}"), cells), &field, |b, f| {
                b.iter(|| step_with(f, dt, exec).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, eps_sweep, pde_step);
criterion_main!(benches);
