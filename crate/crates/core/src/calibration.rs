//! Evaluation metrics: top-k error, expected calibration error (ECE),
//! average confidence, and the reliability bins behind them.
//!
//! Confidence is the maximum predicted probability. ECE uses equal-width
//! bins on confidence, right-closed (`(lo, hi]`, with 0 falling into the
//! first bin); empty bins contribute nothing.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndkernel::{argmax, top_k_indices, Mat};

/// Default number of reliability bins.
pub const DEFAULT_BINS: usize = 15;

const ROW_SUM_TOL: f64 = 1e-9;

/// Predicted probabilities and true labels for a set of samples. Validated at
/// construction: rows are distributions, labels are in range, and the batch
/// is nonempty.
#[derive(Debug, Clone)]
pub struct PredictionBatch {
    probs: Mat,
    labels: Vec<usize>,
}

impl PredictionBatch {
    pub fn new(probs: Mat, labels: Vec<usize>) -> Result<Self> {
        if probs.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} probability rows vs {} labels",
                probs.rows(),
                labels.len()
            )));
        }
        let k = probs.cols();
        for (i, &y) in labels.iter().enumerate() {
            if y >= k {
                return Err(Error::Data(format!("sample {i}: label {y} out of range for K={k}")));
            }
        }
        for i in 0..probs.rows() {
            let row = probs.row(i);
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Data(format!("sample {i}: probabilities outside [0,1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Data(format!("sample {i}: row sums to {sum}, expected 1")));
            }
        }
        Ok(PredictionBatch { probs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.probs.cols()
    }

    pub fn probs(&self) -> &Mat {
        &self.probs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn confidence(&self, i: usize) -> f64 {
        let row = self.probs.row(i);
        row[argmax(row)]
    }

    fn is_correct(&self, i: usize) -> bool {
        argmax(self.probs.row(i)) == self.labels[i]
    }
}

/// Equal-width reliability bins over confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBins {
    pub bins: usize,
    pub counts: Vec<usize>,
    pub confidence_sums: Vec<f64>,
    pub correct_counts: Vec<usize>,
}

impl ReliabilityBins {
    /// `(lo, hi]` edges of bin `i`.
    pub fn edges(&self, i: usize) -> (f64, f64) {
        (i as f64 / self.bins as f64, (i + 1) as f64 / self.bins as f64)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn mean_confidence(&self, i: usize) -> f64 {
        if self.counts[i] == 0 {
            0.0
        } else {
            self.confidence_sums[i] / self.counts[i] as f64
        }
    }

    pub fn accuracy(&self, i: usize) -> f64 {
        if self.counts[i] == 0 {
            0.0
        } else {
            self.correct_counts[i] as f64 / self.counts[i] as f64
        }
    }

    /// Bin-weighted mean absolute gap between accuracy and confidence.
    pub fn ece(&self) -> f64 {
        let n = self.total() as f64;
        let mut acc = 0.0;
        for i in 0..self.bins {
            if self.counts[i] > 0 {
                let w = self.counts[i] as f64 / n;
                acc += w * (self.accuracy(i) - self.mean_confidence(i)).abs();
            }
        }
        acc
    }

    /// CSV table: `bin_lo,bin_hi,count,mean_confidence,accuracy`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "bin_lo,bin_hi,count,mean_confidence,accuracy")?;
        for i in 0..self.bins {
            let (lo, hi) = self.edges(i);
            writeln!(
                w,
                "{lo},{hi},{},{},{}",
                self.counts[i],
                self.mean_confidence(i),
                self.accuracy(i)
            )?;
        }
        Ok(())
    }
}

/// Index of the right-closed bin containing confidence `c`.
fn bin_index(c: f64, bins: usize) -> usize {
    let raw = (c * bins as f64).ceil() as isize - 1;
    raw.clamp(0, bins as isize - 1) as usize
}

/// Assign every sample to a reliability bin.
pub fn reliability_bins(batch: &PredictionBatch, bins: usize) -> Result<ReliabilityBins> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bin count must be at least 1".into()));
    }
    let mut out = ReliabilityBins {
        bins,
        counts: vec![0; bins],
        confidence_sums: vec![0.0; bins],
        correct_counts: vec![0; bins],
    };
    for i in 0..batch.len() {
        let c = batch.confidence(i);
        let b = bin_index(c, bins);
        out.counts[b] += 1;
        out.confidence_sums[b] += c;
        if batch.is_correct(i) {
            out.correct_counts[b] += 1;
        }
    }
    Ok(out)
}

/// Fraction of samples whose true label is not among the top-`k` predictions.
pub fn topk_error(batch: &PredictionBatch, k: usize) -> Result<f64> {
    if k == 0 || k > batch.num_classes() {
        return Err(Error::InvalidArgument(format!(
            "top-k: k={k} invalid for K={}",
            batch.num_classes()
        )));
    }
    let mut misses = 0usize;
    for i in 0..batch.len() {
        let top = top_k_indices(batch.probs.row(i), k)?;
        if !top.contains(&batch.labels[i]) {
            misses += 1;
        }
    }
    Ok(misses as f64 / batch.len() as f64)
}

/// Expected calibration error with `bins` equal-width bins.
pub fn ece(batch: &PredictionBatch, bins: usize) -> Result<f64> {
    Ok(reliability_bins(batch, bins)?.ece())
}

/// Mean over samples of the maximum predicted probability.
pub fn avg_confidence(batch: &PredictionBatch) -> f64 {
    let total: f64 = (0..batch.len()).map(|i| batch.confidence(i)).sum();
    total / batch.len() as f64
}

/// Aggregate evaluation report. `top5_err` is only defined for K >= 5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibReport {
    pub top1_err: f64,
    pub top5_err: Option<f64>,
    pub ece: f64,
    pub avg_conf: f64,
    pub bins: ReliabilityBins,
}

/// Compute every metric over one batch.
pub fn full_report(batch: &PredictionBatch, bins: usize) -> Result<CalibReport> {
    let top1_err = topk_error(batch, 1)?;
    let top5_err = if batch.num_classes() >= 5 { Some(topk_error(batch, 5)?) } else { None };
    let rb = reliability_bins(batch, bins)?;
    Ok(CalibReport { top1_err, top5_err, ece: rb.ece(), avg_conf: avg_confidence(batch), bins: rb })
}
