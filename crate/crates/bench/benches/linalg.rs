use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use risfa_bench::gaussian;
use risfa_core::linalg::{khatri_rao, kron, lstsq, pinv, DEFAULT_PINV_REL_TOL};

fn products(c: &mut Criterion) {
    let mut group = c.benchmark_group("products");
    for n in [4, 8, 16] {
        let (a, b) = (gaussian(n, n, 1), gaussian(n, n, 2));
        group.bench_with_input(BenchmarkId::new("kron", n), &n, |bench, _| {
            bench.iter(|| kron(black_box(&a), black_box(&b)))
        });
        group.bench_with_input(BenchmarkId::new("khatri_rao", n), &n, |bench, _| {
            bench.iter(|| khatri_rao(black_box(&a), black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn pseudo_inverse(c: &mut Criterion) {
    let mut group = c.benchmark_group("pinv");
    // Shapes of W_G, W_H and B_total for the small P2 configuration.
    for (rows, cols) in [(640, 8), (640, 24), (256, 2)] {
        let a = gaussian(rows, cols, 3);
        let b = gaussian(rows, 1, 4);
        let id = format!("{rows}x{cols}");
        group.bench_function(BenchmarkId::new("pinv", &id), |bench| {
            bench.iter(|| pinv(black_box(&a), DEFAULT_PINV_REL_TOL).unwrap())
        });
        group.bench_function(BenchmarkId::new("lstsq", &id), |bench| {
            bench.iter(|| lstsq(black_box(&a), black_box(&b), DEFAULT_PINV_REL_TOL).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, products, pseudo_inverse);
criterion_main!(benches);
