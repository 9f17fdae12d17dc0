//! Benchmarks for the hot paths: the dual-ascent subroutine, the knapsack
//! LP, and the end-to-end pipelines at coarse accuracy.

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nestnorm_bench::blob_instance;
use nestnorm_core::ball_kmedian::{
    lmp_primal_dual, solve_ball_kmedian, solve_knapsack_lp, BallKMInstance, Guess,
};
use nestnorm_core::msrdc::{solve_msrdc, HFunction, MsrdcInstance};

fn bench_dual_ascent(c: &mut Criterion) {
    let metric = blob_instance(11, 12, 3.0);
    let inst = BallKMInstance {
        metric,
        k: 2,
        rho: 4,
    };
    c.bench_function("lmp_primal_dual 24pts", |b| {
        b.iter(|| lmp_primal_dual(black_box(&inst), black_box(7.5), &Guess::empty()).unwrap())
    });
}

fn bench_knapsack(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let items: Vec<(f64, f64)> = (0..64)
        .map(|_| (rng.gen_range(-3.0..8.0), rng.gen_range(0.0..4.0)))
        .collect();
    c.bench_function("knapsack_lp 64 items", |b| {
        b.iter(|| solve_knapsack_lp(black_box(&items), black_box(20.0)).unwrap())
    });
}

fn bench_ball_pipeline(c: &mut Criterion) {
    let metric = blob_instance(11, 8, 4.0);
    let inst = BallKMInstance {
        metric,
        k: 2,
        rho: 4,
    };
    c.bench_function("solve_ball_kmedian 16pts eps3", |b| {
        b.iter(|| solve_ball_kmedian(black_box(&inst), black_box(3.0)).unwrap())
    });
}

fn bench_cover_pipeline(c: &mut Criterion) {
    let metric = blob_instance(11, 8, 4.0);
    let inst = MsrdcInstance {
        metric,
        k: 2,
        h: HFunction::new(vec![1.0], vec![0.0]).unwrap(),
    };
    c.bench_function("solve_msrdc 16pts eps1", |b| {
        b.iter(|| solve_msrdc(black_box(&inst), black_box(1.0)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_dual_ascent,
    bench_knapsack,
    bench_ball_pipeline,
    bench_cover_pipeline
);
criterion_main!(benches);
