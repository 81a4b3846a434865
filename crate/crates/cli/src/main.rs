use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ols_cli::config::{load_config, Overrides, StrategyKind};
use ols_cli::{cmd_compare, cmd_export_embeddings, cmd_gen_data, cmd_train};
use ols_core::error::Result;

#[derive(Parser)]
#[command(
    name = "ols",
    about = "Train small classifiers with hard, uniformly smoothed, or online-smoothed targets and measure calibration",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Config file (flat key = value format); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training seed; repeat the flag for several seeds.
    #[arg(long)]
    seed: Vec<u64>,
    /// Strategy (hard | ls | ols); repeat the flag for several.
    #[arg(long)]
    strategy: Vec<String>,
    /// Hard/soft mixing weight for the online strategy.
    #[arg(long)]
    alpha: Option<f64>,
    /// Uniform label smoothing coefficient.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Reliability bin count for calibration metrics.
    #[arg(long)]
    bins: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Result<Overrides> {
        let strategies =
            self.strategy.iter().map(|s| StrategyKind::parse(s)).collect::<Result<Vec<_>>>()?;
        Ok(Overrides {
            out: self.out.clone(),
            seeds: self.seed.clone(),
            strategies,
            alpha: self.alpha,
            epsilon: self.epsilon,
            epochs: self.epochs,
            bins: self.bins,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset CSV plus its regeneration manifest.
    GenData {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train one (strategy, seed) run and emit its artifacts.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train every (strategy, seed) pair and write the comparison table.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Export penultimate-layer embeddings of the configured dataset.
    ExportEmbeddings {
        #[command(flatten)]
        common: CommonArgs,
        /// Checkpoint file written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output CSV path (falls back to <out>/embeddings.csv).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenData { common } => {
            let config = load_config(common.config.as_deref(), &common.overrides()?)?;
            cmd_gen_data(&config)?;
            println!("wrote {}", config.out.join("dataset.csv").display());
        }
        Command::Train { common } => {
            let config = load_config(common.config.as_deref(), &common.overrides()?)?;
            let artifacts = cmd_train(&config)?;
            let r = &artifacts.report;
            println!(
                "{} seed {}: val top-1 err {:.4}, ece {:.4}, avg conf {:.4} (best val epoch {})",
                r.strategy,
                r.seed,
                r.val_report.top1_err,
                r.val_report.ece,
                r.val_report.avg_conf,
                r.best_val_epoch
            );
            println!("run directory: {}", artifacts.run_dir.display());
        }
        Command::Compare { common } => {
            let config = load_config(common.config.as_deref(), &common.overrides()?)?;
            let table = cmd_compare(&config)?;
            for m in &table.medians {
                println!(
                    "{}: median top-1 err {:.4}, ece {:.4}, avg conf {:.4}",
                    m.strategy, m.top1_err, m.ece, m.avg_conf
                );
            }
            println!("table: {}", config.out.join("comparison_table.csv").display());
        }
        Command::ExportEmbeddings { common, checkpoint, csv } => {
            let config = load_config(common.config.as_deref(), &common.overrides()?)?;
            let out_path = match csv {
                Some(p) => p,
                None => config.out.join("embeddings.csv"),
            };
            cmd_export_embeddings(&config, &checkpoint, &out_path)?;
            println!("wrote {}", out_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
