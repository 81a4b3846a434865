//! Training laboratory for online label smoothing.
//!
//! The crate builds a small but complete pipeline around one idea: instead of
//! smoothing classifier targets with a fixed uniform distribution, keep a
//! per-class soft-label matrix that is re-estimated every epoch from the
//! model's own predictions on correctly classified samples, and mix it with
//! the hard one-hot target. The pieces:
//!
//! - [`ndkernel`]: dense row-major `f64` matrices, stable softmax, top-k.
//! - [`model`]: a plain MLP classifier with manual backpropagation.
//! - [`labeling`]: target strategies (hard, uniform smoothing, online
//!   smoothing) and the evolving soft-label matrix.
//! - [`objective`]: hard/soft cross-entropy, their weighted combination, and
//!   the analytic gradient at the logits.
//! - [`calibration`]: top-k error, expected calibration error, average
//!   confidence, reliability bins.
//! - [`data`]: synthetic Gaussian-cluster datasets, CSV/IDX ingestion,
//!   stratified splits, class-balanced sampling.
//! - [`trainer`]: the epoch loop (SGD with momentum, weight decay, step LR
//!   decay) that ties everything together.
//!
//! Every run is driven by explicit integer seeds; repeated runs are bitwise
//! identical.

pub mod calibration;
pub mod data;
pub mod error;
pub mod labeling;
pub mod model;
pub mod ndkernel;
pub mod objective;
pub mod rng;
pub mod trainer;

pub use calibration::{CalibReport, PredictionBatch, ReliabilityBins};
pub use data::{Dataset, SplitSpec, SyntheticSpec};
pub use error::{Error, Result};
pub use labeling::{EpochAccumulator, SoftLabelMatrix, TargetStrategy};
pub use model::{ForwardCache, Grads, MlpParams};
pub use ndkernel::Mat;
pub use objective::LossBreakdown;
pub use trainer::{EpochLog, OptimizerState, TrainConfig, TrainOutcome};
