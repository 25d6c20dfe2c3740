use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dphase_core::random::{random_smooth, stream_rng};
use dphase_core::{luxemburg_norm, DoublePhase, EigenSolver, ExponentField, Mesh, QuotientKind, ScalarField, SolverOptions};

fn problem(mesh: &Arc<Mesh>) -> DoublePhase {
    let f = |s: &str| ExponentField::parse(s, mesh).unwrap();
    DoublePhase::new(Arc::clone(mesh), f("3.2 + 0.2*sin(3*x)"), f("1.5 + 0.1*y"), f("2.2 + 0.1*cos(2*x)")).unwrap()
}

fn meshes() -> Vec<(&'static str, Arc<Mesh>)> {
    vec![
        ("1d_n1000", Arc::new(Mesh::interval(0.0, 1.0, 1000).unwrap())),
        ("2d_32x32", Arc::new(Mesh::rectangle((0.0, 1.0), (0.0, 1.0), 32, 32).unwrap())),
    ]
}

fn energies(c: &mut Criterion) {
    let mut g = c.benchmark_group("energies");
    for (name, mesh) in meshes() {
        let pb = problem(&mesh);
        let u = random_smooth(&mesh, &mut stream_rng(1, 0), 6);
        g.bench_with_input(BenchmarkId::new("eval_energies", name), &u, |b, u| b.iter(|| pb.eval_energies(u).unwrap()));
        g.bench_with_input(BenchmarkId::new("grad_j", name), &u, |b, u| b.iter(|| pb.grad_j(u).unwrap()));
        let f = ScalarField::of_function(&u);
        g.bench_with_input(BenchmarkId::new("luxemburg_norm", name), &f, |b, f| {
            b.iter(|| luxemburg_norm(&mesh, f, pb.q()).unwrap())
        });
    }
    g.finish();
}

fn rayleigh(c: &mut Criterion) {
    let mut g = c.benchmark_group("minimize_rayleigh");
    g.sample_size(10);
    let mesh = Arc::new(Mesh::interval(0.0, 1.0, 100).unwrap());
    let s = EigenSolver::new(problem(&mesh), SolverOptions { restarts: 2, ..Default::default() }).unwrap();
    g.bench_function("j_over_i_1d_n100", |b| b.iter(|| s.minimize_rayleigh(QuotientKind::JOverI)));
    g.finish();
}

criterion_group!(benches, energies, rayleigh);
criterion_main!(benches);
