//! Label-target strategies: hard one-hot targets, uniform label smoothing,
//! and online label smoothing backed by an evolving class-conditional
//! soft-label matrix.
//!
//! The soft-label matrix is `K x K`; row `j` is the target distribution used
//! for samples whose true class is `j`. During an epoch the trainer feeds
//! every correctly classified sample's predicted distribution into an
//! [`EpochAccumulator`]; at epoch end [`EpochAccumulator::normalize`] turns
//! the per-class sums into the matrix that supervises the *next* epoch. The
//! very first epoch is supervised by the uniform matrix.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndkernel::{argmax, Mat};

/// Row-sum tolerance for a valid soft-label matrix.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// How a training target is constructed for a sample with true class `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetStrategy {
    /// One-hot target.
    Hard,
    /// `(1 - epsilon) * one_hot(y) + epsilon / K` over all classes.
    UniformLs { epsilon: f64 },
    /// `alpha * one_hot(y) + (1 - alpha) * s_prev[y]`, where `s_prev` is the
    /// soft-label matrix published at the end of the previous epoch.
    Ols { alpha: f64 },
}

impl TargetStrategy {
    pub fn uniform_ls(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidArgument(format!(
                "label smoothing epsilon must be in [0,1], got {epsilon}"
            )));
        }
        Ok(TargetStrategy::UniformLs { epsilon })
    }

    pub fn ols(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("alpha must be in [0,1], got {alpha}")));
        }
        Ok(TargetStrategy::Ols { alpha })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TargetStrategy::Hard => Ok(()),
            TargetStrategy::UniformLs { epsilon } => Self::uniform_ls(epsilon).map(|_| ()),
            TargetStrategy::Ols { alpha } => Self::ols(alpha).map(|_| ()),
        }
    }

    /// Whether this strategy maintains the evolving soft-label matrix.
    pub fn uses_soft_matrix(&self) -> bool {
        matches!(self, TargetStrategy::Ols { .. })
    }
}

/// `K x K` class-conditional soft targets. Row `j` is the target distribution
/// for true class `j`: entries in `[0,1]`, each row summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelMatrix {
    mat: Mat,
}

impl SoftLabelMatrix {
    /// The uniform matrix (every entry `1/k`) that supervises the first epoch.
    pub fn init_uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "soft-label matrix needs at least 2 classes, got {k}"
            )));
        }
        let mat = Mat::from_vec(k, k, vec![1.0 / k as f64; k * k])?;
        Ok(SoftLabelMatrix { mat })
    }

    pub fn from_mat(mat: Mat) -> Result<Self> {
        let s = SoftLabelMatrix { mat };
        s.validate()?;
        Ok(s)
    }

    pub fn k(&self) -> usize {
        self.mat.rows()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        self.mat.row(j)
    }

    pub fn as_mat(&self) -> &Mat {
        &self.mat
    }

    pub fn validate(&self) -> Result<()> {
        if self.mat.rows() != self.mat.cols() || self.mat.rows() < 2 {
            return Err(Error::Shape(format!(
                "soft-label matrix must be square with k >= 2, got {}x{}",
                self.mat.rows(),
                self.mat.cols()
            )));
        }
        for j in 0..self.mat.rows() {
            let row = self.mat.row(j);
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidArgument(format!(
                    "soft-label row {j} has entries outside [0,1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "soft-label row {j} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    /// CSV snapshot: a comment line carrying the epoch index, a header row of
    /// class indices, then the K data rows.
    pub fn write_csv<W: Write>(&self, w: &mut W, epoch: usize) -> Result<()> {
        writeln!(w, "# epoch={epoch}")?;
        let header: Vec<String> = (0..self.k()).map(|c| c.to_string()).collect();
        writeln!(w, "{}", header.join(","))?;
        for j in 0..self.k() {
            let row: Vec<String> = self.row(j).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Parse a snapshot written by [`write_csv`](Self::write_csv). Returns the
    /// epoch index and the matrix.
    pub fn read_csv<R: BufRead>(r: R) -> Result<(usize, Self)> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| Error::Parse("empty soft-label CSV".into()))??;
        let epoch: usize = first
            .strip_prefix("# epoch=")
            .ok_or_else(|| Error::Parse(format!("expected '# epoch=<t>' line, got '{first}'")))?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad epoch index: {e}")))?;
        let header =
            lines.next().ok_or_else(|| Error::Parse("soft-label CSV missing header".into()))??;
        let k = header.split(',').count();
        let mut data = Vec::with_capacity(k * k);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("row {i}: bad value '{field}': {e}")))?;
                data.push(v);
            }
        }
        if data.len() != k * k {
            return Err(Error::Parse(format!(
                "soft-label CSV has {} values, expected {}",
                data.len(),
                k * k
            )));
        }
        let mat = Mat::from_vec(k, k, data)?;
        Ok((epoch, SoftLabelMatrix::from_mat(mat)?))
    }
}

/// Per-epoch accumulator of predicted distributions for correctly classified
/// samples, one row per true class.
#[derive(Debug, Clone)]
pub struct EpochAccumulator {
    k: usize,
    sums: Mat,
    correct_counts: Vec<u64>,
}

impl EpochAccumulator {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "accumulator needs at least 2 classes, got {k}"
            )));
        }
        Ok(EpochAccumulator { k, sums: Mat::zeros(k, k), correct_counts: vec![0; k] })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn correct_counts(&self) -> &[u64] {
        &self.correct_counts
    }

    pub fn sums(&self) -> &Mat {
        &self.sums
    }

    pub fn total_accumulated(&self) -> u64 {
        self.correct_counts.iter().sum()
    }

    /// Add one correctly classified sample's predicted distribution to the
    /// row of its true class. The caller enforces the correctly-classified
    /// gate; an argmax that disagrees with `y` is a caller bug and is
    /// rejected.
    pub fn accumulate(&mut self, y: usize, p: &[f64]) -> Result<()> {
        if p.len() != self.k {
            return Err(Error::Shape(format!(
                "probability vector length {} does not match k={}",
                p.len(),
                self.k
            )));
        }
        if y >= self.k {
            return Err(Error::InvalidArgument(format!("class {y} out of range for k={}", self.k)));
        }
        if argmax(p) != y {
            return Err(Error::InvalidArgument(format!(
                "accumulate requires argmax(p) == y: argmax is {}, y is {y}",
                argmax(p)
            )));
        }
        debug_assert!((p.iter().sum::<f64>() - 1.0).abs() < ROW_SUM_TOL);
        for (s, &v) in self.sums.row_mut(y).iter_mut().zip(p.iter()) {
            *s += v;
        }
        self.correct_counts[y] += 1;
        Ok(())
    }

    /// Entrywise merge of a second accumulator (for deterministic combination
    /// of per-worker accumulators).
    pub fn merge(&mut self, other: &EpochAccumulator) -> Result<()> {
        if other.k != self.k {
            return Err(Error::Shape(format!("merge: k {} vs {}", other.k, self.k)));
        }
        for (s, &o) in self.sums.data_mut().iter_mut().zip(other.sums.data().iter()) {
            *s += o;
        }
        for (c, &o) in self.correct_counts.iter_mut().zip(other.correct_counts.iter()) {
            *c += o;
        }
        Ok(())
    }

    /// Row-normalize the accumulated sums into a valid soft-label matrix.
    /// Classes that saw no correct prediction fall back to the uniform row.
    pub fn normalize(&self) -> SoftLabelMatrix {
        let k = self.k;
        let mut mat = Mat::zeros(k, k);
        for j in 0..k {
            let out = mat.row_mut(j);
            if self.correct_counts[j] == 0 {
                out.fill(1.0 / k as f64);
            } else {
                let row = self.sums.row(j);
                let total: f64 = row.iter().sum();
                for (o, &v) in out.iter_mut().zip(row.iter()) {
                    *o = v / total;
                }
            }
        }
        SoftLabelMatrix { mat }
    }
}

/// Build the training target for a sample of true class `y`.
///
/// `s_prev` is required for [`TargetStrategy::Ols`] and ignored otherwise.
/// The result always sums to 1 within 1e-12.
pub fn effective_target(
    strategy: TargetStrategy,
    s_prev: Option<&SoftLabelMatrix>,
    y: usize,
    k: usize,
) -> Result<Vec<f64>> {
    strategy.validate()?;
    if y >= k {
        return Err(Error::InvalidArgument(format!("class {y} out of range for k={k}")));
    }
    let mut target = vec![0.0; k];
    match strategy {
        TargetStrategy::Hard => {
            target[y] = 1.0;
        }
        TargetStrategy::UniformLs { epsilon } => {
            let base = epsilon / k as f64;
            for t in target.iter_mut() {
                *t = base;
            }
            target[y] += 1.0 - epsilon;
        }
        TargetStrategy::Ols { alpha } => {
            let s = s_prev.ok_or_else(|| {
                Error::InvalidArgument("online smoothing requires a soft-label matrix".into())
            })?;
            if s.k() != k {
                return Err(Error::Shape(format!(
                    "soft-label matrix k={} does not match k={k}",
                    s.k()
                )));
            }
            let row = s.row(y);
            for (t, &sv) in target.iter_mut().zip(row.iter()) {
                *t = (1.0 - alpha) * sv;
            }
            target[y] += alpha;
        }
    }
    Ok(target)
}
