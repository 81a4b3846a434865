use criterion::{black_box, criterion_group, criterion_main, Criterion};

use ols_bench::bench_dataset;
use ols_core::labeling::TargetStrategy;
use ols_core::model::{backward, forward, init_params};
use ols_core::ndkernel::softmax_rows;
use ols_core::trainer::{evaluate, train, TrainConfig};

fn bench_forward_backward(c: &mut Criterion) {
    let (train_ds, _) = bench_dataset(128, 100);
    let params = init_params(&[128, 64, 32, 4], 7).unwrap();
    let batch = {
        let indices: Vec<usize> = (0..64).collect();
        let mut m = ols_core::ndkernel::Mat::zeros(64, 128);
        for (dst, &src) in indices.iter().enumerate() {
            m.row_mut(dst).copy_from_slice(train_ds.features().row(src));
        }
        m
    };
    c.bench_function("forward batch 64", |b| {
        b.iter(|| forward(black_box(&params), black_box(&batch)).unwrap())
    });

    let cache = forward(&params, &batch).unwrap();
    let dlogits = softmax_rows(cache.logits());
    c.bench_function("backward batch 64", |b| {
        b.iter(|| backward(black_box(&params), black_box(&cache), black_box(&dlogits)).unwrap())
    });
}

fn bench_epochs(c: &mut Criterion) {
    let (train_ds, val_ds) = bench_dataset(64, 100);
    for (name, strategy) in
        [("hard", TargetStrategy::Hard), ("ols", TargetStrategy::ols(0.5).unwrap())]
    {
        c.bench_function(&format!("train 3 epochs {name}"), |b| {
            b.iter(|| {
                let config = TrainConfig::new(strategy, vec![64, 64, 32, 4], 3, 1);
                train(black_box(&config), black_box(&train_ds), black_box(&val_ds)).unwrap()
            })
        });
    }
}

fn bench_evaluate(c: &mut Criterion) {
    let (train_ds, val_ds) = bench_dataset(64, 100);
    let config = TrainConfig::new(TargetStrategy::Hard, vec![64, 64, 32, 4], 2, 1);
    let out = train(&config, &train_ds, &val_ds).unwrap();
    c.bench_function("evaluate val split", |b| {
        b.iter(|| evaluate(black_box(&out.params), black_box(&val_ds), 15).unwrap())
    });
}

criterion_group!(benches, bench_forward_backward, bench_epochs, bench_evaluate);
criterion_main!(benches);
