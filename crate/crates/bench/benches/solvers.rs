use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mechkit::allocation::StandardKind;
use mechkit::convergence::{converge, ConvergeOptions};
use mechkit::solver::{solve_deterministic, solve_rev, DEFAULT_CAP};
use mechkit::Rational;
use mechkit_bench::{chain, random_valuation, set, uniform_grid};

fn rev(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_rev");
    group.sample_size(10);
    for steps in [2i64, 3, 4, 5] {
        let dist = uniform_grid::<f64>(2, steps);
        let cube = set(StandardKind::Cube, 2);
        group.bench_with_input(BenchmarkId::new("float", dist.len()), &dist, |b, d| {
            b.iter(|| solve_rev(&cube, d).unwrap())
        });
    }
    // exact pivots grow denominators quickly; keep the sizes small
    for steps in [2i64, 3] {
        let dist = uniform_grid::<Rational>(2, steps);
        let cube = set(StandardKind::Cube, 2);
        group.bench_with_input(BenchmarkId::new("exact", dist.len()), &dist, |b, d| {
            b.iter(|| solve_rev(&cube, d).unwrap())
        });
    }
    group.finish();
}

fn deterministic(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_deterministic");
    group.sample_size(10);
    for n in [3usize, 4, 5] {
        let dist = random_valuation::<Rational>(11, 2, n);
        let verts = set(StandardKind::CubeVertices, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &dist, |b, d| {
            b.iter(|| solve_deterministic(&verts, d, DEFAULT_CAP).unwrap())
        });
    }
    group.finish();
}

fn limit(c: &mut Criterion) {
    let mut group = c.benchmark_group("converge");
    group.sample_size(10);
    for size in [2usize, 4] {
        let seq = chain::<f64>(5, 2, size);
        let dist = random_valuation::<f64>(6, 2, 4);
        let opts = ConvergeOptions {
            n_max: 60,
            ..ConvergeOptions::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(size), &seq, |b, s| {
            b.iter(|| converge(s, &dist, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, rev, deterministic, limit);
criterion_main!(benches);
