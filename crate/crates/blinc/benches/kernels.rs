//! Kernel and strategy benchmarks: the rayon-parallel multiply against the
//! sequential fallback, and the three correction-block formulas at a
//! `q > k` shape where their costs separate.

use std::hint::black_box;
use std::time::Duration;

use blinc::incremental::{
    compute_b_existing, compute_b_large_q, compute_b_small_q, compute_dbar, compute_dt,
};
use blinc::linalg::{left_pinv, RidgeParam};
use blinc::matrix::Matrix;
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn bench_gemm(c: &mut Criterion) {
    let mut group = c.benchmark_group("gemm");
    group.sample_size(10).measurement_time(Duration::from_secs(3));
    for n in [256usize, 512] {
        let a = random(n, n, 1);
        let b = random(n, n, 2);
        group.bench_function(format!("parallel/{n}"), |bench| {
            bench.iter(|| black_box(a.matmul(black_box(&b))))
        });
        group.bench_function(format!("sequential/{n}"), |bench| {
            bench.iter(|| black_box(a.matmul_seq(black_box(&b))))
        });
    }
    group.finish();
}

fn bench_correction_block(c: &mut Criterion) {
    let (l, k, q) = (1600, 200, 800);
    let a = random(l, k, 3);
    let ax = random(q, k, 4);
    let apinv = left_pinv(&a, RidgeParam::ZERO).unwrap();
    let dt = compute_dt(&apinv, &ax).unwrap();

    let mut group = c.benchmark_group("correction_block");
    group.sample_size(10).measurement_time(Duration::from_secs(5));
    group.bench_function("existing", |bench| {
        bench.iter(|| black_box(compute_b_existing(&apinv, &dt).unwrap()))
    });
    // The proposed forms pay for the projected block too.
    group.bench_function("small_q", |bench| {
        bench.iter(|| {
            let dbar = compute_dbar(&apinv, &dt).unwrap();
            black_box(compute_b_small_q(&dbar, &ax).unwrap())
        })
    });
    group.bench_function("large_q", |bench| {
        bench.iter(|| {
            let dbar = compute_dbar(&apinv, &dt).unwrap();
            black_box(compute_b_large_q(&dbar, &ax).unwrap())
        })
    });
    group.finish();
}

criterion_group!(benches, bench_gemm, bench_correction_block);
criterion_main!(benches);
