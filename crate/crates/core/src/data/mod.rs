//! Datasets: synthetic generation, CSV/IDX ingestion, feature scaling to
//! `[-1, 1]`, class-balanced sampling, and stratified splits.

mod csv;
mod idx;
mod synthetic;

pub use csv::{load_csv, write_dataset_csv};
pub use idx::load_idx;
pub use synthetic::{gen_synthetic, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndkernel::Mat;
use crate::rng::Rng;

/// Labeled samples with features in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Mat,
    labels: Vec<usize>,
    k: usize,
    class_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        features: Mat,
        labels: Vec<usize>,
        k: usize,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Data(format!(
                "{} feature rows vs {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::Data("dataset must contain at least one sample".into()));
        }
        if k < 2 {
            return Err(Error::Data(format!("dataset needs at least 2 classes, got {k}")));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= k) {
            return Err(Error::Data(format!("sample {i}: label {y} out of range for k={k}")));
        }
        if let Some(names) = &class_names {
            if names.len() != k {
                return Err(Error::Data(format!("{} class names for k={k} classes", names.len())));
            }
        }
        for (pos, &v) in features.data().iter().enumerate() {
            if !(-1.0..=1.0).contains(&v) {
                let (i, j) = (pos / features.cols(), pos % features.cols());
                return Err(Error::Data(format!("feature [{i}][{j}] = {v} outside [-1, 1]")));
            }
        }
        Ok(Dataset { features, labels, k, class_names })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn features(&self) -> &Mat {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn label_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.k];
        for &y in &self.labels {
            hist[y] += 1;
        }
        hist
    }

    /// New dataset from a subset of sample indices (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::Data("subset must keep at least one sample".into()));
        }
        let mut features = Mat::zeros(indices.len(), self.dim());
        let mut labels = Vec::with_capacity(indices.len());
        for (dst, &src) in indices.iter().enumerate() {
            if src >= self.len() {
                return Err(Error::Data(format!("subset index {src} out of range")));
            }
            features.row_mut(dst).copy_from_slice(self.features.row(src));
            labels.push(self.labels[src]);
        }
        Dataset::new(features, labels, self.k, self.class_names.clone())
    }
}

/// Affine map sending `lo -> -1` and `hi -> +1`. Entries outside `[lo, hi]`
/// are rejected.
pub fn normalize_minus1_1(raw: &Mat, lo: f64, hi: f64) -> Result<Mat> {
    if hi <= lo {
        return Err(Error::InvalidArgument(format!("normalize: hi={hi} must exceed lo={lo}")));
    }
    let span = hi - lo;
    let mut out = raw.clone();
    for (pos, v) in out.data_mut().iter_mut().enumerate() {
        if !(lo..=hi).contains(v) {
            let (i, j) = (pos / raw.cols(), pos % raw.cols());
            return Err(Error::Data(format!(
                "normalize: entry [{i}][{j}] = {v} outside [{lo}, {hi}]"
            )));
        }
        *v = 2.0 * (*v - lo) / span - 1.0;
    }
    Ok(out)
}

/// Fractions of a stratified train/val/test partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let spec =
            SplitSpec { train_fraction: train, val_fraction: val, test_fraction: test, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fs = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fs.iter().any(|&f| f <= 0.0) {
            return Err(Error::Config("split fractions must be positive".into()));
        }
        let sum: f64 = fs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.7, val_fraction: 0.2, test_fraction: 0.1, seed: 0 }
    }
}

/// Per-class counts via largest remainder, with rounding error carried across
/// classes so that the global split sizes track the fractions.
fn allocate_counts(n_class: usize, fractions: &[f64; 3], carry: &mut [f64; 3]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut remainders = [0f64; 3];
    let mut assigned = 0usize;
    for s in 0..3 {
        let target = fractions[s] * n_class as f64;
        counts[s] = target.floor() as usize;
        remainders[s] = target - counts[s] as f64;
        assigned += counts[s];
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        (remainders[b] + carry[b]).total_cmp(&(remainders[a] + carry[a])).then(a.cmp(&b))
    });
    for &s in order.iter().take(n_class - assigned) {
        counts[s] += 1;
    }
    for s in 0..3 {
        carry[s] += fractions[s] * n_class as f64 - counts[s] as f64;
    }
    counts
}

/// Stratified, disjoint, exhaustive partition into train/val/test. Each
/// split must receive at least one sample of every class.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let fractions = [spec.train_fraction, spec.val_fraction, spec.test_fraction];
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for (i, &y) in ds.labels().iter().enumerate() {
        per_class[y].push(i);
    }
    let mut rng = Rng::seed_from(spec.seed);
    let mut splits: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut carry = [0f64; 3];
    for (class, indices) in per_class.iter_mut().enumerate() {
        if indices.is_empty() {
            return Err(Error::Data(format!("class {class} has no samples to stratify")));
        }
        let counts = allocate_counts(indices.len(), &fractions, &mut carry);
        if counts.contains(&0) {
            return Err(Error::Data(format!(
                "class {class} is too small ({} samples) to give every split at least one sample",
                indices.len()
            )));
        }
        rng.shuffle(indices);
        let mut cursor = 0;
        for (s, &c) in counts.iter().enumerate() {
            splits[s].extend_from_slice(&indices[cursor..cursor + c]);
            cursor += c;
        }
    }
    // Keep original dataset order inside each split.
    for s in splits.iter_mut() {
        s.sort_unstable();
    }
    Ok((ds.subset(&splits[0])?, ds.subset(&splits[1])?, ds.subset(&splits[2])?))
}

/// Draw exactly `n_per_class` samples per class without replacement.
pub fn balanced_sample(ds: &Dataset, n_per_class: usize, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("n_per_class must be positive".into()));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for (i, &y) in ds.labels().iter().enumerate() {
        per_class[y].push(i);
    }
    let mut rng = Rng::seed_from(seed);
    let mut chosen = Vec::with_capacity(n_per_class * ds.num_classes());
    for (class, indices) in per_class.iter_mut().enumerate() {
        if indices.len() < n_per_class {
            return Err(Error::Data(format!(
                "class {class} has only {} samples, need {n_per_class}",
                indices.len()
            )));
        }
        rng.shuffle(indices);
        chosen.extend_from_slice(&indices[..n_per_class]);
    }
    ds.subset(&chosen)
}
