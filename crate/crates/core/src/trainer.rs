//! The training loop: per-epoch soft-label accumulation, combined hard/soft
//! cross-entropy, SGD with momentum and weight decay, step LR decay, and
//! validation metrics after every epoch.
//!
//! Epoch `t` is supervised by the soft-label matrix published at the end of
//! epoch `t-1` (the uniform matrix for `t = 0`). Within an epoch, every
//! sample whose prediction matches its label on the same forward pass used
//! for the loss is fed into the epoch accumulator; at epoch end the
//! accumulator is normalized and becomes the next epoch's matrix. Strategies
//! without an evolving matrix skip all accumulator work.

use serde::{Deserialize, Serialize};

use crate::calibration::{full_report, CalibReport, PredictionBatch, DEFAULT_BINS};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::labeling::{effective_target, EpochAccumulator, SoftLabelMatrix, TargetStrategy};
use crate::model::{backward, forward, init_params, Grads, MlpParams};
use crate::ndkernel::{argmax, softmax_rows, Mat};
use crate::objective::{loss_hard, loss_soft};
use crate::rng::{derive_seed, Rng};

/// Stream tag separating the shuffle RNG from weight initialization.
const SHUFFLE_STREAM: u64 = 0x5348_5546; // "SHUF"

/// Full experiment recipe for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub strategy: TargetStrategy,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Epochs at which the learning rate is multiplied by `lr_decay_factor`;
    /// the boundary epoch itself already uses the decayed rate.
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    pub seed: u64,
    /// `[D, h1, ..., hL, K]`.
    pub layer_sizes: Vec<usize>,
}

impl TrainConfig {
    /// A config with the standard recipe defaults: batch size 64, initial
    /// learning rate 0.03, momentum 0.9, weight decay 1e-4, no LR decay.
    /// The learning rate is sized for the small MLPs this crate trains; it
    /// is the one knob most worth revisiting for a new dataset.
    pub fn new(
        strategy: TargetStrategy,
        layer_sizes: Vec<usize>,
        epochs: usize,
        seed: u64,
    ) -> Self {
        TrainConfig {
            strategy,
            epochs,
            batch_size: 64,
            lr0: 0.03,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr_decay_epochs: Vec::new(),
            lr_decay_factor: 0.1,
            seed,
            layer_sizes,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !self.lr0.is_finite() || self.lr0 <= 0.0 {
            return Err(Error::Config(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must be in [0,1), got {}", self.momentum)));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight_decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            return Err(Error::Config(format!(
                "lr_decay_factor must be in (0,1), got {}",
                self.lr_decay_factor
            )));
        }
        for w in self.lr_decay_epochs.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config("lr_decay_epochs must be strictly increasing".into()));
            }
        }
        if let Some(&last) = self.lr_decay_epochs.last() {
            if last >= self.epochs {
                return Err(Error::Config(format!(
                    "lr decay epoch {last} is not below epochs={}",
                    self.epochs
                )));
            }
        }
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config("layer_sizes needs at least input and output".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if self.num_classes() < 2 {
            return Err(Error::Config("output layer needs at least 2 classes".into()));
        }
        Ok(())
    }
}

/// Momentum velocity buffers, shape-congruent with the parameters.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub w_velocity: Vec<Mat>,
    pub b_velocity: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn zeros_like(params: &MlpParams) -> Self {
        OptimizerState {
            w_velocity: params.weights.iter().map(|w| Mat::zeros(w.rows(), w.cols())).collect(),
            b_velocity: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }
}

/// Learning rate in effect at `epoch`: `lr0 * factor^(decay epochs <= epoch)`.
pub fn lr_at(config: &TrainConfig, epoch: usize) -> Result<f64> {
    if epoch >= config.epochs {
        return Err(Error::InvalidArgument(format!(
            "epoch {epoch} out of range for {} epochs",
            config.epochs
        )));
    }
    let decays = config.lr_decay_epochs.iter().filter(|&&e| e <= epoch).count();
    Ok(config.lr0 * config.lr_decay_factor.powi(decays as i32))
}

/// One SGD step with momentum and coupled L2 weight decay:
/// `g' = g + wd * w; v = momentum * v + g'; w -= lr * v`.
pub fn sgd_step(
    params: &mut MlpParams,
    grads: &Grads,
    state: &mut OptimizerState,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    if grads.weights.len() != params.weights.len() || grads.biases.len() != params.biases.len() {
        return Err(Error::Shape("gradient layer count does not match parameters".into()));
    }
    for l in 0..params.weights.len() {
        if grads.weights[l].rows() != params.weights[l].rows()
            || grads.weights[l].cols() != params.weights[l].cols()
            || grads.biases[l].len() != params.biases[l].len()
        {
            return Err(Error::Shape(format!("gradient shapes at layer {l} do not match")));
        }
        let w = params.weights[l].data_mut();
        let v = state.w_velocity[l].data_mut();
        let g = grads.weights[l].data();
        for i in 0..w.len() {
            let g_eff = g[i] + weight_decay * w[i];
            v[i] = momentum * v[i] + g_eff;
            w[i] -= lr * v[i];
        }
        let b = &mut params.biases[l];
        let vb = &mut state.b_velocity[l];
        let gb = &grads.biases[l];
        for i in 0..b.len() {
            let g_eff = gb[i] + weight_decay * b[i];
            vb[i] = momentum * vb[i] + g_eff;
            b[i] -= lr * vb[i];
        }
    }
    Ok(())
}

/// One row of the per-epoch log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss_hard: f64,
    pub loss_soft: f64,
    pub loss_total: f64,
    pub train_top1_err: f64,
    pub val_top1_err: f64,
    pub val_ece: f64,
    pub val_avg_conf: f64,
    pub n_accumulated: u64,
}

/// Result of a full training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParams,
    pub epoch_logs: Vec<EpochLog>,
    /// One matrix per epoch for the online strategy, empty otherwise.
    pub matrix_history: Vec<SoftLabelMatrix>,
}

impl TrainOutcome {
    /// Epoch with the lowest validation top-1 error (earliest on ties).
    pub fn best_val_epoch(&self) -> usize {
        let mut best = 0;
        for (i, log) in self.epoch_logs.iter().enumerate() {
            if log.val_top1_err < self.epoch_logs[best].val_top1_err {
                best = i;
            }
        }
        best
    }
}

struct EpochStats {
    sum_hard: f64,
    sum_soft: f64,
    sum_total: f64,
    misses: usize,
    samples: usize,
}

fn gather_batch(ds: &Dataset, indices: &[usize]) -> (Mat, Vec<usize>) {
    let mut batch = Mat::zeros(indices.len(), ds.dim());
    let mut labels = Vec::with_capacity(indices.len());
    for (dst, &src) in indices.iter().enumerate() {
        batch.row_mut(dst).copy_from_slice(ds.features().row(src));
        labels.push(ds.labels()[src]);
    }
    (batch, labels)
}

/// One pass over the training set in the given order. The accumulator only
/// collects prediction statistics; it never influences this epoch's targets,
/// losses, or updates.
#[allow(clippy::too_many_arguments)]
fn run_epoch(
    config: &TrainConfig,
    params: &mut MlpParams,
    opt: &mut OptimizerState,
    s_prev: Option<&SoftLabelMatrix>,
    mut acc: Option<&mut EpochAccumulator>,
    train_ds: &Dataset,
    order: &[usize],
    lr: f64,
) -> Result<EpochStats> {
    let k = config.num_classes();
    let uniform_row = vec![1.0 / k as f64; k];
    let mut stats =
        EpochStats { sum_hard: 0.0, sum_soft: 0.0, sum_total: 0.0, misses: 0, samples: 0 };

    for chunk in order.chunks(config.batch_size) {
        let (batch, labels) = gather_batch(train_ds, chunk);
        let cache = forward(params, &batch)?;
        let probs = softmax_rows(cache.logits());
        let mut dlogits = Mat::zeros(batch.rows(), k);

        for (i, &y) in labels.iter().enumerate() {
            let p = probs.row(i);
            let target = effective_target(config.strategy, s_prev, y, k)?;

            stats.sum_hard += loss_hard(p, y)?;
            stats.sum_soft += match config.strategy {
                TargetStrategy::Hard => 0.0,
                TargetStrategy::UniformLs { .. } => loss_soft(p, &uniform_row)?,
                TargetStrategy::Ols { .. } => {
                    let s = s_prev.expect("online strategy always has a matrix");
                    loss_soft(p, s.row(y))?
                }
            };
            stats.sum_total += loss_soft(p, &target)?;

            let predicted = argmax(p);
            if predicted != y {
                stats.misses += 1;
            } else if let Some(acc) = acc.as_deref_mut() {
                acc.accumulate(y, p)?;
            }

            for (g, (&pk, &tk)) in dlogits.row_mut(i).iter_mut().zip(p.iter().zip(target.iter())) {
                *g = pk - tk;
            }
        }
        stats.samples += batch.rows();

        let grads = backward(params, &cache, &dlogits)?;
        sgd_step(params, &grads, opt, lr, config.momentum, config.weight_decay)?;
    }
    Ok(stats)
}

/// Train a model from scratch. Returns the final parameters, one log row per
/// epoch, and (for the online strategy) the per-epoch soft-label matrices.
pub fn train(config: &TrainConfig, train_ds: &Dataset, val_ds: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    for (name, ds) in [("train", train_ds), ("val", val_ds)] {
        if ds.dim() != config.input_dim() {
            return Err(Error::Shape(format!(
                "{name} dataset has {} features, model expects {}",
                ds.dim(),
                config.input_dim()
            )));
        }
        if ds.num_classes() != config.num_classes() {
            return Err(Error::Shape(format!(
                "{name} dataset has {} classes, model expects {}",
                ds.num_classes(),
                config.num_classes()
            )));
        }
    }

    let k = config.num_classes();
    let mut params = init_params(&config.layer_sizes, config.seed)?;
    let mut opt = OptimizerState::zeros_like(&params);
    let mut shuffle_rng = Rng::seed_from(derive_seed(config.seed, SHUFFLE_STREAM));
    let uses_matrix = config.strategy.uses_soft_matrix();

    let mut s_prev = if uses_matrix { Some(SoftLabelMatrix::init_uniform(k)?) } else { None };
    let mut matrix_history = Vec::new();
    let mut epoch_logs = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_ds.len()).collect();

    for epoch in 0..config.epochs {
        let lr = lr_at(config, epoch)?;
        shuffle_rng.shuffle(&mut order);
        let mut acc = if uses_matrix { Some(EpochAccumulator::new(k)?) } else { None };

        let stats = run_epoch(
            config,
            &mut params,
            &mut opt,
            s_prev.as_ref(),
            acc.as_mut(),
            train_ds,
            &order,
            lr,
        )?;

        let n_accumulated = acc.as_ref().map_or(0, |a| a.total_accumulated());
        if let Some(acc) = acc {
            let s_t = acc.normalize();
            matrix_history.push(s_t.clone());
            s_prev = Some(s_t);
        }

        let val_report = evaluate(&params, val_ds, DEFAULT_BINS)?;
        let n = stats.samples as f64;
        epoch_logs.push(EpochLog {
            epoch,
            lr,
            loss_hard: stats.sum_hard / n,
            loss_soft: stats.sum_soft / n,
            loss_total: stats.sum_total / n,
            train_top1_err: stats.misses as f64 / n,
            val_top1_err: val_report.top1_err,
            val_ece: val_report.ece,
            val_avg_conf: val_report.avg_conf,
            n_accumulated,
        });
    }

    Ok(TrainOutcome { params, epoch_logs, matrix_history })
}

/// Evaluate a model over a whole dataset.
pub fn evaluate(params: &MlpParams, ds: &Dataset, bins: usize) -> Result<CalibReport> {
    if ds.num_classes() != params.num_classes() {
        return Err(Error::Shape(format!(
            "dataset has {} classes, model expects {}",
            ds.num_classes(),
            params.num_classes()
        )));
    }
    let cache = forward(params, ds.features())?;
    let probs = softmax_rows(cache.logits());
    let batch = PredictionBatch::new(probs, ds.labels().to_vec())?;
    full_report(&batch, bins)
}
