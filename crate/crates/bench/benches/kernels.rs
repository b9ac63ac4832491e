use std::hint::black_box;

use air_bench::{problem, square};
use air_core::reg::{build_laplacian, grad_wrt_w};
use air_core::train::{Penalty, TrainConfig, Trainer};
use air_core::{svd, Parameterization, RegParam};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn matmul(c: &mut Criterion) {
    let mut g = c.benchmark_group("matmul");
    for n in [32, 64, 128] {
        let (a, b) = (square(n, 1), square(n, 2));
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bch, _| {
            bch.iter(|| black_box(&a).matmul(black_box(&b)))
        });
    }
    g.finish();
}

fn jacobi_svd(c: &mut Criterion) {
    let mut g = c.benchmark_group("svd");
    for n in [16, 32, 64] {
        let a = square(n, 3);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bch, _| {
            bch.iter(|| svd(black_box(&a)).unwrap())
        });
    }
    g.finish();
}

fn laplacian(c: &mut Criterion) {
    let mut g = c.benchmark_group("laplacian_grad");
    for n in [32, 100] {
        let p = RegParam::new(square(n, 4).scale(0.1), Parameterization::Product).unwrap();
        let m = square(n, 5);
        g.bench_with_input(BenchmarkId::new("build", n), &n, |bch, _| {
            bch.iter(|| build_laplacian(black_box(&p)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("grad_w", n), &n, |bch, _| {
            bch.iter(|| grad_wrt_w(black_box(&p), black_box(&m)).unwrap())
        });
    }
    g.finish();
}

fn train_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("train_step");
    g.sample_size(20);
    for (m, n) in [(50, 50), (100, 100)] {
        let p = problem(m, n, 3, 6);
        for (name, penalty) in [("air", Penalty::Learned), ("dmf", Penalty::None)] {
            g.bench_function(BenchmarkId::new(name, m), |bch| {
                let cfg = TrainConfig {
                    max_iters: usize::MAX,
                    log_every: usize::MAX,
                    ..Default::default()
                };
                let mut t = Trainer::new(
                    p.state.clone(),
                    penalty.clone(),
                    &p.mask,
                    &p.y_obs,
                    cfg,
                    Some(&p.truth),
                )
                .unwrap();
                bch.iter(|| t.step().unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, matmul, jacobi_svd, laplacian, train_step);
criterion_main!(benches);
