//! Seed-deterministic Gaussian-cluster datasets with controllable class
//! confusability.
//!
//! Cluster centers sit on a line along feature axis 0: the two classes of a
//! confusion pair are `cluster_spread` apart (heavy overlap), while centers
//! of unrelated classes are at least `4 * cluster_spread` apart (little
//! overlap). After sampling, all features are rescaled by one global affine
//! map to `[-1, 1]`, which preserves the relative geometry.

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::ndkernel::Mat;
use crate::rng::Rng;

/// Recipe for a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub k: usize,
    pub d: usize,
    pub n_per_class: usize,
    pub cluster_spread: f64,
    /// Pairs of classes whose centers are placed close together. Each class
    /// may appear in at most one pair.
    pub confusion_pairs: Vec<(usize, usize)>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!("synthetic: k must be >= 2, got {}", self.k)));
        }
        if self.d == 0 {
            return Err(Error::Config("synthetic: d must be positive".into()));
        }
        if self.n_per_class == 0 {
            return Err(Error::Config("synthetic: n_per_class must be positive".into()));
        }
        if !self.cluster_spread.is_finite() || self.cluster_spread <= 0.0 {
            return Err(Error::Config(format!(
                "synthetic: cluster_spread must be positive, got {}",
                self.cluster_spread
            )));
        }
        let mut seen = vec![false; self.k];
        for &(a, b) in &self.confusion_pairs {
            if a >= self.k || b >= self.k {
                return Err(Error::Config(format!(
                    "synthetic: confusion pair ({a},{b}) references a class >= k={}",
                    self.k
                )));
            }
            if a == b {
                return Err(Error::Config(format!(
                    "synthetic: confusion pair ({a},{b}) must name two distinct classes"
                )));
            }
            for c in [a, b] {
                if seen[c] {
                    return Err(Error::Config(format!(
                        "synthetic: class {c} appears in more than one confusion pair"
                    )));
                }
                seen[c] = true;
            }
        }
        Ok(())
    }
}

/// Deterministic center layout: classes are grouped (a confusion pair forms
/// one group, every other class its own group) and groups are laid out left
/// to right along axis 0 with a `4 * spread` gap; pair members are `spread`
/// apart inside their group.
fn class_centers(spec: &SyntheticSpec) -> Vec<f64> {
    let mut group_of = vec![usize::MAX; spec.k];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &(a, b) in &spec.confusion_pairs {
        group_of[a] = groups.len();
        group_of[b] = groups.len();
        groups.push(vec![a, b]);
    }
    for (c, slot) in group_of.iter_mut().enumerate() {
        if *slot == usize::MAX {
            *slot = groups.len();
            groups.push(vec![c]);
        }
    }
    let spread = spec.cluster_spread;
    let mut centers = vec![0.0; spec.k];
    let mut x = 0.0;
    for group in &groups {
        for (offset, &class) in group.iter().enumerate() {
            centers[class] = x + offset as f64 * spread;
        }
        x += (group.len() - 1) as f64 * spread + 4.0 * spread;
    }
    centers
}

/// Generate the dataset described by `spec`. Exactly `n_per_class` samples
/// per class, fully determined by `spec.seed`.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let centers = class_centers(spec);
    let mut rng = Rng::seed_from(spec.seed);
    let n = spec.k * spec.n_per_class;
    let mut raw = Mat::zeros(n, spec.d);
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (class, &center) in centers.iter().enumerate() {
        for _ in 0..spec.n_per_class {
            let out = raw.row_mut(row);
            out[0] = center + rng.next_gaussian() * spec.cluster_spread;
            for v in out.iter_mut().skip(1) {
                *v = rng.next_gaussian() * spec.cluster_spread;
            }
            labels.push(class);
            row += 1;
        }
    }
    // One global affine map so the relative geometry survives the rescale.
    let lo = raw.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let features = super::normalize_minus1_1(&raw, lo, hi)?;
    Dataset::new(features, labels, spec.k, None)
}
