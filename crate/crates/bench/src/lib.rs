//! Shared fixtures for the benchmark targets.

use ols_core::data::{gen_synthetic, split, Dataset, SplitSpec, SyntheticSpec};
use ols_core::ndkernel::Mat;
use ols_core::rng::Rng;

/// Random matrix with standard normal entries.
pub fn random_mat(seed: u64, rows: usize, cols: usize) -> Mat {
    let mut rng = Rng::seed_from(seed);
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.next_gaussian()).collect()).unwrap()
}

/// A mid-size confusable dataset split into train/val, matching the shape of
/// the comparison experiments.
pub fn bench_dataset(d: usize, n_per_class: usize) -> (Dataset, Dataset) {
    let spec = SyntheticSpec {
        k: 4,
        d,
        n_per_class,
        cluster_spread: 1.0,
        confusion_pairs: vec![(0, 1), (2, 3)],
        seed: 91,
    };
    let ds = gen_synthetic(&spec).unwrap();
    let (train_ds, val_ds, _) = split(&ds, &SplitSpec::new(0.6, 0.3, 0.1, 92).unwrap()).unwrap();
    (train_ds, val_ds)
}
