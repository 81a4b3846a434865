use criterion::{black_box, criterion_group, criterion_main, Criterion};

use ols_bench::random_mat;
use ols_core::calibration::{ece, PredictionBatch};
use ols_core::ndkernel::{matmul, softmax_rows, top_k_indices, Mat};
use ols_core::rng::Rng;

fn bench_matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    for size in [32usize, 64, 128] {
        let a = random_mat(1, size, size);
        let b = random_mat(2, size, size);
        group.bench_function(format!("{size}x{size}"), |bench| {
            bench.iter(|| matmul(black_box(&a), black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn bench_softmax(c: &mut Criterion) {
    let logits = random_mat(3, 512, 16);
    c.bench_function("softmax_rows 512x16", |b| b.iter(|| softmax_rows(black_box(&logits))));
}

fn bench_top_k(c: &mut Criterion) {
    let mut rng = Rng::seed_from(4);
    let row: Vec<f64> = (0..1000).map(|_| rng.next_f64()).collect();
    c.bench_function("top_k_indices 5 of 1000", |b| {
        b.iter(|| top_k_indices(black_box(&row), 5).unwrap())
    });
}

fn bench_ece(c: &mut Criterion) {
    let mut rng = Rng::seed_from(5);
    let n = 2000;
    let k = 8;
    let mut probs = Mat::zeros(n, k);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut p: Vec<f64> = (0..k).map(|_| rng.next_f64() + 1e-3).collect();
        let total: f64 = p.iter().sum();
        for v in p.iter_mut() {
            *v /= total;
        }
        probs.row_mut(i).copy_from_slice(&p);
        labels.push(rng.next_below(k));
    }
    let batch = PredictionBatch::new(probs, labels).unwrap();
    c.bench_function("ece 2000x8 15 bins", |b| b.iter(|| ece(black_box(&batch), 15).unwrap()));
}

criterion_group!(benches, bench_matmul, bench_softmax, bench_top_k, bench_ece);
criterion_main!(benches);
