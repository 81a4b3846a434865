//! Whole-pipeline check through the public API: generate, split, train with
//! each strategy, evaluate, export embeddings, round-trip the checkpoint.

use ols_core::data::{gen_synthetic, split, SplitSpec, SyntheticSpec};
use ols_core::labeling::TargetStrategy;
use ols_core::model::{load_checkpoint, penultimate_embeddings, save_checkpoint};
use ols_core::trainer::{evaluate, train, TrainConfig};

#[test]
fn end_to_end_pipeline() {
    let spec = SyntheticSpec {
        k: 4,
        d: 10,
        n_per_class: 60,
        cluster_spread: 1.0,
        confusion_pairs: vec![(0, 1)],
        seed: 3,
    };
    let ds = gen_synthetic(&spec).unwrap();
    let (train_ds, val_ds, test_ds) =
        split(&ds, &SplitSpec::new(0.6, 0.2, 0.2, 4).unwrap()).unwrap();

    for strategy in [
        TargetStrategy::Hard,
        TargetStrategy::uniform_ls(0.1).unwrap(),
        TargetStrategy::ols(0.5).unwrap(),
    ] {
        let mut config = TrainConfig::new(strategy, vec![10, 16, 8, 4], 12, 11);
        config.batch_size = 32;
        config.lr_decay_epochs = vec![8];
        let out = train(&config, &train_ds, &val_ds).unwrap();
        assert_eq!(out.epoch_logs.len(), 12);
        // The decayed rate shows up in the log at the boundary epoch.
        assert_eq!(out.epoch_logs[8].lr, config.lr0 * config.lr_decay_factor);

        // Comfortably better than the 0.75 chance level.
        let report = evaluate(&out.params, &test_ds, 15).unwrap();
        assert!(report.top1_err < 0.6, "{strategy:?}: test err {}", report.top1_err);
        assert!(report.ece <= 1.0 && report.avg_conf <= 1.0);

        let emb = penultimate_embeddings(&out.params, test_ds.features()).unwrap();
        assert_eq!(emb.rows(), test_ds.len());
        assert_eq!(emb.cols(), 8);

        let mut buf = Vec::new();
        save_checkpoint(&out.params, &mut buf).unwrap();
        let reloaded = load_checkpoint(&mut &buf[..]).unwrap();
        assert_eq!(reloaded, out.params);
        let again = evaluate(&reloaded, &test_ds, 15).unwrap();
        assert_eq!(again, report);

        if strategy.uses_soft_matrix() {
            assert_eq!(out.matrix_history.len(), 12);
        } else {
            assert!(out.matrix_history.is_empty());
        }
    }
}
