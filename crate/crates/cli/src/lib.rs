//! Command-line experiment runner for the online label smoothing laboratory.
//!
//! Subcommands: `gen-data` (write a synthetic dataset + manifest), `train`
//! (one run with full artifact emission), `compare` (strategy/seed sweep into
//! a comparison table), and `export-embeddings` (penultimate activations for
//! external projection).

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{cmd_compare, cmd_export_embeddings, cmd_gen_data, cmd_train, resolve_dataset};
pub use config::{
    load_config, parse_config_file, DataSource, ExperimentConfig, Overrides, StrategyKind,
};
pub use output::{ComparisonRow, ComparisonTable, MedianRow, RunReport};
