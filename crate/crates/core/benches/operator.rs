//! Operator and solver throughput. Run once with default features (rayon)
//! and once with `--no-default-features` (sequential); the benchmark ids carry
//! the mode so criterion keeps the two baselines apart. The parallel build
//! also times a one-thread pool for a same-binary comparison.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nlh_core::kernels::library::heat;
use nlh_core::nonlocal_op::{OperatorPlan, PlanOptions, Storage};
use nlh_core::solver::{self, SolveOptions};
use nlh_core::{Exterior, Grid, GridFunction};
use std::hint::black_box;

const MODE: &str = if cfg!(feature = "parallel") { "parallel" } else { "sequential" };

fn single_thread<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        f()
    }
}

fn operator(c: &mut Criterion) {
    let k = heat(1, 0.5).unwrap();
    let mut g = c.benchmark_group("apply");
    for n in [512, 2048] {
        let grid = Grid::d1(n, 16.0);
        let f = GridFunction::from_fn(grid, Exterior::Zero, |x| (-x[0] * x[0]).exp());
        let opts = PlanOptions { storage: Storage::Dense, fft: Some(false) };
        let plan = OperatorPlan::build(&k, grid, 0.0, Exterior::Zero, &opts).unwrap();
        let mut out = vec![0.0; n];
        g.bench_with_input(BenchmarkId::new(MODE, n), &n, |b, _| b.iter(|| plan.apply_values(black_box(&f.values), &mut out)));
        if cfg!(feature = "parallel") {
            g.bench_with_input(BenchmarkId::new("parallel-1-thread", n), &n, |b, _| {
                b.iter(|| single_thread(|| {
                    let mut o = vec![0.0; n];
                    plan.apply_values(black_box(&f.values), &mut o);
                    o
                }))
            });
        }
    }
    g.finish();

    let mut g = c.benchmark_group("build");
    g.sample_size(10);
    let grid = Grid::d1(1024, 16.0);
    g.bench_function(BenchmarkId::new(MODE, 1024), |b| {
        b.iter(|| OperatorPlan::build(&k, grid, 0.0, Exterior::Zero, &PlanOptions::default()).unwrap())
    });
    g.finish();
}

fn solve(c: &mut Criterion) {
    let k = heat(1, 1.5).unwrap();
    let grid = Grid::d1(1024, 16.0);
    let w0 = GridFunction::from_fn(grid, Exterior::Zero, |x| (-x[0] * x[0]).exp());
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    let opts = SolveOptions { snapshot_stride: usize::MAX, ..SolveOptions::default() };
    g.bench_function(BenchmarkId::new(MODE, "t=0.05"), |b| b.iter(|| solver::solve_with(&k, &w0, 0.05, &opts).unwrap()));
    g.finish();
}

criterion_group!(benches, operator, solve);
criterion_main!(benches);
