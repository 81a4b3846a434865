//! Experiment configuration: a flat `key = value` text format plus
//! command-line overrides.
//!
//! Lines are `key = value`; blank lines and `#` comments are ignored;
//! unknown keys are rejected. Lists are comma-separated; confusion pairs are
//! written `a:b,c:d`. The full key table lives in the README.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ols_core::data::{SplitSpec, SyntheticSpec};
use ols_core::error::{Error, Result};
use ols_core::labeling::TargetStrategy;

/// Where the dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv { path: PathBuf, normalize: bool },
    Idx { images: PathBuf, labels: PathBuf },
}

/// Which target strategy a run uses; epsilon/alpha come from the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Hard,
    Ls,
    Ols,
}

impl StrategyKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "hard" => Ok(StrategyKind::Hard),
            "ls" => Ok(StrategyKind::Ls),
            "ols" => Ok(StrategyKind::Ols),
            other => Err(Error::Config(format!(
                "unknown strategy '{other}' (expected hard, ls, or ols)"
            ))),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StrategyKind::Hard => "hard",
            StrategyKind::Ls => "ls",
            StrategyKind::Ols => "ols",
        };
        f.write_str(s)
    }
}

/// Everything a run (or a sweep of runs) needs. The output directory is
/// deliberately excluded from the JSON echo: the echo pins the experiment,
/// not where its files land.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DataSource,
    pub split: SplitSpec,
    /// Balanced subsample size per class, applied before splitting.
    pub balance_per_class: Option<usize>,
    pub hidden_layers: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub bins: usize,
    pub strategies: Vec<StrategyKind>,
    pub seeds: Vec<u64>,
    #[serde(skip)]
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DataSource::Synthetic(SyntheticSpec {
                k: 4,
                d: 128,
                n_per_class: 500,
                cluster_spread: 1.0,
                confusion_pairs: vec![(0, 1), (2, 3)],
                seed: 20,
            }),
            split: SplitSpec {
                train_fraction: 0.6,
                val_fraction: 0.3,
                test_fraction: 0.1,
                seed: 21,
            },
            balance_per_class: None,
            hidden_layers: vec![64, 32],
            epochs: 30,
            batch_size: 64,
            lr0: 0.03,
            momentum: 0.9,
            weight_decay: 1e-4,
            lr_decay_epochs: Vec::new(),
            lr_decay_factor: 0.1,
            alpha: 0.5,
            epsilon: 0.1,
            bins: 15,
            strategies: vec![StrategyKind::Ols],
            seeds: vec![1],
            out: PathBuf::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.out.as_os_str().is_empty() {
            return Err(Error::Config(
                "output directory not set (use --out or `out = ...`)".into(),
            ));
        }
        if let DataSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        self.split.validate()?;
        TargetStrategy::uniform_ls(self.epsilon)?;
        TargetStrategy::ols(self.alpha)?;
        Ok(())
    }

    /// Concrete target strategy for one run.
    pub fn resolve_strategy(&self, kind: StrategyKind) -> Result<TargetStrategy> {
        match kind {
            StrategyKind::Hard => Ok(TargetStrategy::Hard),
            StrategyKind::Ls => TargetStrategy::uniform_ls(self.epsilon),
            StrategyKind::Ols => TargetStrategy::ols(self.alpha),
        }
    }

    /// Full layer sizes for a dataset with the given dimensions.
    pub fn layer_sizes(&self, input_dim: usize, num_classes: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden_layers.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(&self.hidden_layers);
        sizes.push(num_classes);
        sizes
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|e| Error::Config(format!("{key}: bad integer '{v}': {e}")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    v.trim().parse().map_err(|e| Error::Config(format!("{key}: bad integer '{v}': {e}")))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse().map_err(|e| Error::Config(format!("{key}: bad number '{v}': {e}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::Config(format!("{key}: expected true or false, got '{other}'"))),
    }
}

fn parse_list<T>(key: &str, v: &str, f: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    let v = v.trim();
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|item| f(key, item)).collect()
}

fn parse_pairs(key: &str, v: &str) -> Result<Vec<(usize, usize)>> {
    let v = v.trim();
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|pair| {
            let (a, b) = pair
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("{key}: expected a:b pairs, got '{pair}'")))?;
            Ok((parse_usize(key, a)?, parse_usize(key, b)?))
        })
        .collect()
}

/// Parse a config file into a config, starting from the defaults.
pub fn parse_config_file(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    // The dataset kind and its parameters may arrive in any order, so stage
    // the dataset fields and assemble at the end.
    let mut dataset_kind: Option<String> = None;
    let mut synthetic = match &config.dataset {
        DataSource::Synthetic(spec) => spec.clone(),
        _ => unreachable!("default dataset is synthetic"),
    };
    let mut csv_path: Option<PathBuf> = None;
    let mut csv_normalize = false;
    let mut idx_images: Option<PathBuf> = None;
    let mut idx_labels: Option<PathBuf> = None;

    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value', got '{line}'", line_no + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "dataset" => dataset_kind = Some(value.to_string()),
            "synthetic.k" => synthetic.k = parse_usize(key, value)?,
            "synthetic.d" => synthetic.d = parse_usize(key, value)?,
            "synthetic.n_per_class" => synthetic.n_per_class = parse_usize(key, value)?,
            "synthetic.cluster_spread" => synthetic.cluster_spread = parse_f64(key, value)?,
            "synthetic.confusion_pairs" => synthetic.confusion_pairs = parse_pairs(key, value)?,
            "synthetic.seed" => synthetic.seed = parse_u64(key, value)?,
            "csv.path" => csv_path = Some(PathBuf::from(value)),
            "csv.normalize" => csv_normalize = parse_bool(key, value)?,
            "idx.images" => idx_images = Some(PathBuf::from(value)),
            "idx.labels" => idx_labels = Some(PathBuf::from(value)),
            "balance_per_class" => config.balance_per_class = Some(parse_usize(key, value)?),
            "split.train" => config.split.train_fraction = parse_f64(key, value)?,
            "split.val" => config.split.val_fraction = parse_f64(key, value)?,
            "split.test" => config.split.test_fraction = parse_f64(key, value)?,
            "split.seed" => config.split.seed = parse_u64(key, value)?,
            "hidden" => config.hidden_layers = parse_list(key, value, parse_usize)?,
            "epochs" => config.epochs = parse_usize(key, value)?,
            "batch_size" => config.batch_size = parse_usize(key, value)?,
            "lr0" => config.lr0 = parse_f64(key, value)?,
            "momentum" => config.momentum = parse_f64(key, value)?,
            "weight_decay" => config.weight_decay = parse_f64(key, value)?,
            "lr_decay_epochs" => config.lr_decay_epochs = parse_list(key, value, parse_usize)?,
            "lr_decay_factor" => config.lr_decay_factor = parse_f64(key, value)?,
            "alpha" => config.alpha = parse_f64(key, value)?,
            "epsilon" => config.epsilon = parse_f64(key, value)?,
            "bins" => config.bins = parse_usize(key, value)?,
            "strategies" => {
                config.strategies = parse_list(key, value, |_, s| StrategyKind::parse(s))?
            }
            "seeds" => config.seeds = parse_list(key, value, parse_u64)?,
            "out" => config.out = PathBuf::from(value),
            other => {
                return Err(Error::Config(format!("line {}: unknown key '{other}'", line_no + 1)))
            }
        }
    }

    config.dataset = match dataset_kind.as_deref() {
        None | Some("synthetic") => DataSource::Synthetic(synthetic),
        Some("csv") => DataSource::Csv {
            path: csv_path.ok_or_else(|| Error::Config("csv dataset needs csv.path".into()))?,
            normalize: csv_normalize,
        },
        Some("idx") => DataSource::Idx {
            images: idx_images
                .ok_or_else(|| Error::Config("idx dataset needs idx.images".into()))?,
            labels: idx_labels
                .ok_or_else(|| Error::Config("idx dataset needs idx.labels".into()))?,
        },
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown dataset kind '{other}' (expected synthetic, csv, or idx)"
            )))
        }
    };
    Ok(config)
}

/// Flag-level overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub strategies: Vec<StrategyKind>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub epochs: Option<usize>,
    pub bins: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        if !self.seeds.is_empty() {
            config.seeds = self.seeds.clone();
        }
        if !self.strategies.is_empty() {
            config.strategies = self.strategies.clone();
        }
        if let Some(alpha) = self.alpha {
            config.alpha = alpha;
        }
        if let Some(epsilon) = self.epsilon {
            config.epsilon = epsilon;
        }
        if let Some(epochs) = self.epochs {
            config.epochs = epochs;
        }
        if let Some(bins) = self.bins {
            config.bins = bins;
        }
    }
}

/// Load a config (defaults when `path` is `None`) and apply overrides.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => parse_config_file(p)?,
        None => ExperimentConfig::default(),
    };
    overrides.apply(&mut config);
    Ok(config)
}

/// Render the synthetic portion of a config as a manifest that
/// `parse_config_file` reads back.
pub fn synthetic_manifest(spec: &SyntheticSpec) -> String {
    let pairs: Vec<String> = spec.confusion_pairs.iter().map(|(a, b)| format!("{a}:{b}")).collect();
    format!(
        "dataset = synthetic\n\
         synthetic.k = {}\n\
         synthetic.d = {}\n\
         synthetic.n_per_class = {}\n\
         synthetic.cluster_spread = {}\n\
         synthetic.confusion_pairs = {}\n\
         synthetic.seed = {}\n",
        spec.k,
        spec.d,
        spec.n_per_class,
        spec.cluster_spread,
        pairs.join(","),
        spec.seed
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_empty_config() {
        let parsed = parse_config_str("").unwrap();
        assert_eq!(parsed, ExperimentConfig::default());
    }

    #[test]
    fn parses_full_config() {
        let text = "\
# a comment
dataset = synthetic
synthetic.k = 3
synthetic.d = 16
synthetic.n_per_class = 50
synthetic.cluster_spread = 2.0
synthetic.confusion_pairs = 0:2
synthetic.seed = 9
split.train = 0.5
split.val = 0.25
split.test = 0.25
split.seed = 4
hidden = 8,4
epochs = 5
batch_size = 16
lr0 = 0.1
momentum = 0.8
weight_decay = 0.001
lr_decay_epochs = 2,4
lr_decay_factor = 0.5
alpha = 0.6
epsilon = 0.2
bins = 10
strategies = hard,ls,ols
seeds = 3,4
out = runs/x
";
        let c = parse_config_str(text).unwrap();
        match &c.dataset {
            DataSource::Synthetic(s) => {
                assert_eq!(s.k, 3);
                assert_eq!(s.d, 16);
                assert_eq!(s.confusion_pairs, vec![(0, 2)]);
                assert_eq!(s.seed, 9);
            }
            other => panic!("unexpected dataset {other:?}"),
        }
        assert_eq!(c.hidden_layers, vec![8, 4]);
        assert_eq!(c.lr_decay_epochs, vec![2, 4]);
        assert_eq!(c.strategies, vec![StrategyKind::Hard, StrategyKind::Ls, StrategyKind::Ols]);
        assert_eq!(c.seeds, vec![3, 4]);
        assert_eq!(c.out, PathBuf::from("runs/x"));
        c.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_key() {
        let err = parse_config_str("learning_rate = 0.1").unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");
    }

    #[test]
    fn rejects_bad_strategy_and_pair_syntax() {
        assert!(parse_config_str("strategies = sgd").is_err());
        assert!(parse_config_str("synthetic.confusion_pairs = 0-1").is_err());
    }

    #[test]
    fn csv_dataset_requires_path() {
        assert!(parse_config_str("dataset = csv").is_err());
        let c = parse_config_str("dataset = csv\ncsv.path = d.csv\ncsv.normalize = true").unwrap();
        assert_eq!(c.dataset, DataSource::Csv { path: PathBuf::from("d.csv"), normalize: true });
    }

    #[test]
    fn overrides_apply() {
        let mut c = ExperimentConfig::default();
        let ov = Overrides {
            out: Some(PathBuf::from("elsewhere")),
            seeds: vec![7, 8],
            strategies: vec![StrategyKind::Hard],
            alpha: Some(0.25),
            epsilon: None,
            epochs: Some(3),
            bins: Some(5),
        };
        ov.apply(&mut c);
        assert_eq!(c.out, PathBuf::from("elsewhere"));
        assert_eq!(c.seeds, vec![7, 8]);
        assert_eq!(c.strategies, vec![StrategyKind::Hard]);
        assert_eq!(c.alpha, 0.25);
        assert_eq!(c.epsilon, 0.1);
        assert_eq!(c.epochs, 3);
        assert_eq!(c.bins, 5);
    }

    #[test]
    fn manifest_round_trips() {
        let spec = SyntheticSpec {
            k: 5,
            d: 7,
            n_per_class: 11,
            cluster_spread: 1.5,
            confusion_pairs: vec![(1, 3), (0, 4)],
            seed: 123,
        };
        let manifest = synthetic_manifest(&spec);
        let parsed = parse_config_str(&manifest).unwrap();
        assert_eq!(parsed.dataset, DataSource::Synthetic(spec));
    }

    #[test]
    fn config_echo_json_round_trips() {
        let config = ExperimentConfig { out: PathBuf::from("somewhere"), ..Default::default() };
        let json = serde_json::to_string(&config).unwrap();
        assert!(!json.contains("somewhere"), "out dir must not leak into the echo");
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.out, PathBuf::new());
        let mut original_sans_out = config;
        original_sans_out.out = PathBuf::new();
        assert_eq!(back, original_sans_out);
    }
}
