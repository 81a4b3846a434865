//! The four subcommands: gen-data, train, compare, export-embeddings.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ols_core::data::{
    balanced_sample, gen_synthetic, load_csv, load_idx, split, write_dataset_csv, Dataset,
};
use ols_core::error::{Error, Result};
use ols_core::model::{load_checkpoint_file, penultimate_embeddings, save_checkpoint_file};
use ols_core::trainer::{evaluate, train, TrainConfig, TrainOutcome};

use crate::config::{synthetic_manifest, DataSource, ExperimentConfig, StrategyKind};
use crate::output::{
    write_comparison_csv, write_embeddings_csv, write_epoch_log_csv, write_report_json,
    ComparisonRow, ComparisonTable, RunReport,
};

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Config(format!("cannot create output directory {}: {e}", dir.display()))
    })
}

/// Resolve the configured data source into an in-memory dataset, applying the
/// optional class-balanced subsample.
pub fn resolve_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let ds = match &config.dataset {
        DataSource::Synthetic(spec) => gen_synthetic(spec)?,
        DataSource::Csv { path, normalize } => load_csv(path, *normalize)?,
        DataSource::Idx { images, labels } => load_idx(images, labels)?,
    };
    match config.balance_per_class {
        Some(n) => balanced_sample(&ds, n, config.split.seed),
        None => Ok(ds),
    }
}

/// Generate the synthetic dataset and write `dataset.csv` plus a
/// `manifest.txt` that regenerates it byte-for-byte.
pub fn cmd_gen_data(config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    let spec = match &config.dataset {
        DataSource::Synthetic(spec) => spec,
        other => {
            return Err(Error::Config(format!(
                "gen-data needs a synthetic dataset spec, config has {other:?}"
            )))
        }
    };
    create_out_dir(&config.out)?;
    let ds = gen_synthetic(spec)?;
    write_dataset_csv(&ds, &config.out.join("dataset.csv"))?;
    fs::write(config.out.join("manifest.txt"), synthetic_manifest(spec))?;
    Ok(())
}

/// Everything cmd_train produces, for callers that want to inspect the run.
pub struct TrainArtifacts {
    pub run_dir: PathBuf,
    pub outcome: TrainOutcome,
    pub report: RunReport,
}

/// Train one (strategy, seed) pair and emit the run directory: epoch_log.csv,
/// checkpoint.bin, report.json, val_reliability.csv, and one soft-label
/// matrix snapshot per epoch for the online strategy.
pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainArtifacts> {
    config.validate()?;
    if config.strategies.len() != 1 || config.seeds.len() != 1 {
        return Err(Error::Config(format!(
            "train runs exactly one strategy and one seed (got {} strategies, {} seeds); use compare for sweeps",
            config.strategies.len(),
            config.seeds.len()
        )));
    }
    let ds = resolve_dataset(config)?;
    train_one(config, &ds, config.strategies[0], config.seeds[0], &config.out)
}

fn train_one(
    config: &ExperimentConfig,
    ds: &Dataset,
    kind: StrategyKind,
    seed: u64,
    run_dir: &Path,
) -> Result<TrainArtifacts> {
    let (train_ds, val_ds, test_ds) = split(ds, &config.split)?;
    let strategy = config.resolve_strategy(kind)?;
    let train_config = TrainConfig {
        strategy,
        epochs: config.epochs,
        batch_size: config.batch_size,
        lr0: config.lr0,
        momentum: config.momentum,
        weight_decay: config.weight_decay,
        lr_decay_epochs: config.lr_decay_epochs.clone(),
        lr_decay_factor: config.lr_decay_factor,
        seed,
        layer_sizes: config.layer_sizes(ds.dim(), ds.num_classes()),
    };

    create_out_dir(run_dir)?;
    let outcome = train(&train_config, &train_ds, &val_ds)?;

    write_epoch_log_csv(&outcome.epoch_logs, &run_dir.join("epoch_log.csv"))?;
    for (t, matrix) in outcome.matrix_history.iter().enumerate() {
        let mut file = fs::File::create(run_dir.join(format!("soft_matrix_epoch_{t}.csv")))?;
        matrix.write_csv(&mut file, t)?;
        file.flush()?;
    }
    save_checkpoint_file(&outcome.params, &run_dir.join("checkpoint.bin"))?;

    let val_report = evaluate(&outcome.params, &val_ds, config.bins)?;
    let test_report = evaluate(&outcome.params, &test_ds, config.bins)?;
    let mut bins_file = fs::File::create(run_dir.join("val_reliability.csv"))?;
    val_report.bins.write_csv(&mut bins_file)?;
    bins_file.flush()?;

    let report = RunReport {
        config: config.clone(),
        strategy: kind.to_string(),
        seed,
        best_val_epoch: outcome.best_val_epoch(),
        val_report,
        test_report,
        checkpoint: "checkpoint.bin".to_string(),
    };
    write_report_json(&report, &run_dir.join("report.json"))?;

    Ok(TrainArtifacts { run_dir: run_dir.to_path_buf(), outcome, report })
}

/// Train every (strategy, seed) pair on identical data and write
/// `comparison_table.csv` with per-strategy medians. Failed runs are logged
/// to `failures.txt` and stderr; the table keeps the completed rows.
pub fn cmd_compare(config: &ExperimentConfig) -> Result<ComparisonTable> {
    config.validate()?;
    if config.strategies.len() < 2 && config.seeds.len() < 2 {
        return Err(Error::Config(
            "compare needs at least two strategies or at least two seeds".into(),
        ));
    }
    let ds = resolve_dataset(config)?;
    create_out_dir(&config.out)?;

    let mut rows = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    for &kind in &config.strategies {
        for &seed in &config.seeds {
            let run_dir = config.out.join(format!("{kind}_seed{seed}"));
            // Each run gets a single-pair config so its report echo is
            // self-contained.
            let mut run_config = config.clone();
            run_config.strategies = vec![kind];
            run_config.seeds = vec![seed];
            match train_one(&run_config, &ds, kind, seed, &run_dir) {
                Ok(artifacts) => {
                    let r = &artifacts.report;
                    rows.push(ComparisonRow {
                        strategy: kind.to_string(),
                        seed,
                        top1_err: r.val_report.top1_err,
                        top5_err: r.val_report.top5_err,
                        ece: r.val_report.ece,
                        avg_conf: r.val_report.avg_conf,
                        best_val_epoch: r.best_val_epoch,
                    });
                }
                Err(e) => {
                    let line = format!("{kind} seed {seed}: {e}");
                    eprintln!("run failed: {line}");
                    failures.push(line);
                }
            }
        }
    }
    if !failures.is_empty() {
        fs::write(config.out.join("failures.txt"), failures.join("\n") + "\n")?;
    }
    let table = ComparisonTable::with_medians(rows);
    write_comparison_csv(&table, &config.out.join("comparison_table.csv"))?;
    Ok(table)
}

/// Export penultimate-layer embeddings of the configured dataset under a
/// saved checkpoint.
pub fn cmd_export_embeddings(
    config: &ExperimentConfig,
    checkpoint: &Path,
    out_path: &Path,
) -> Result<()> {
    let params = load_checkpoint_file(checkpoint)?;
    let ds = resolve_dataset(config)?;
    if ds.dim() != params.input_dim() {
        return Err(Error::Shape(format!(
            "dataset has {} features, checkpoint expects {}",
            ds.dim(),
            params.input_dim()
        )));
    }
    let embeddings = penultimate_embeddings(&params, ds.features())?;
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    write_embeddings_csv(ds.labels(), &embeddings, out_path)
}
