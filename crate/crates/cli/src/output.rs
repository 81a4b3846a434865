//! File emission and re-parsing: epoch logs, comparison tables, embeddings,
//! and the JSON run report.
//!
//! All floats are written with Rust's shortest round-trip formatting, so
//! every CSV re-parses to bitwise-identical values and repeated runs emit
//! byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use ols_core::calibration::CalibReport;
use ols_core::error::{Error, Result};
use ols_core::ndkernel::Mat;
use ols_core::trainer::EpochLog;

use crate::config::ExperimentConfig;

pub const EPOCH_LOG_HEADER: &str =
    "epoch,lr,loss_hard,loss_soft,loss_total,train_top1_err,val_top1_err,val_ece,val_avg_conf,n_accumulated";

pub const COMPARISON_HEADER: &str = "strategy,seed,top1_err,top5_err,ece,avg_conf,best_val_epoch";

pub fn write_epoch_log_csv(logs: &[EpochLog], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{EPOCH_LOG_HEADER}")?;
    for log in logs {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            log.epoch,
            log.lr,
            log.loss_hard,
            log.loss_soft,
            log.loss_total,
            log.train_top1_err,
            log.val_top1_err,
            log.val_ece,
            log.val_avg_conf,
            log.n_accumulated
        )?;
    }
    w.flush()?;
    Ok(())
}

fn field<'a>(
    fields: &mut impl Iterator<Item = &'a str>,
    what: &str,
    line: usize,
) -> Result<&'a str> {
    fields.next().ok_or_else(|| Error::Parse(format!("line {line}: missing field {what}")))
}

fn parse_num<T: std::str::FromStr>(v: &str, what: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e| Error::Parse(format!("line {line}: bad {what} '{v}': {e}")))
}

pub fn parse_epoch_log_csv(path: &Path) -> Result<Vec<EpochLog>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let (_, header) =
        lines.next().ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))?;
    if header? != EPOCH_LOG_HEADER {
        return Err(Error::Parse(format!("{}: unexpected header", path.display())));
    }
    let mut logs = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let mut fs = line.split(',');
        logs.push(EpochLog {
            epoch: parse_num(field(&mut fs, "epoch", n)?, "epoch", n)?,
            lr: parse_num(field(&mut fs, "lr", n)?, "lr", n)?,
            loss_hard: parse_num(field(&mut fs, "loss_hard", n)?, "loss_hard", n)?,
            loss_soft: parse_num(field(&mut fs, "loss_soft", n)?, "loss_soft", n)?,
            loss_total: parse_num(field(&mut fs, "loss_total", n)?, "loss_total", n)?,
            train_top1_err: parse_num(field(&mut fs, "train_top1_err", n)?, "train_top1_err", n)?,
            val_top1_err: parse_num(field(&mut fs, "val_top1_err", n)?, "val_top1_err", n)?,
            val_ece: parse_num(field(&mut fs, "val_ece", n)?, "val_ece", n)?,
            val_avg_conf: parse_num(field(&mut fs, "val_avg_conf", n)?, "val_avg_conf", n)?,
            n_accumulated: parse_num(field(&mut fs, "n_accumulated", n)?, "n_accumulated", n)?,
        });
    }
    Ok(logs)
}

/// One completed run in a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub seed: u64,
    pub top1_err: f64,
    pub top5_err: Option<f64>,
    pub ece: f64,
    pub avg_conf: f64,
    pub best_val_epoch: usize,
}

/// Per-strategy medians over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub strategy: String,
    pub top1_err: f64,
    pub top5_err: Option<f64>,
    pub ece: f64,
    pub avg_conf: f64,
    pub best_val_epoch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub medians: Vec<MedianRow>,
}

pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

impl ComparisonTable {
    /// Build per-strategy median rows from the per-run rows, in first-seen
    /// strategy order.
    pub fn with_medians(rows: Vec<ComparisonRow>) -> ComparisonTable {
        let mut strategies: Vec<String> = Vec::new();
        for row in &rows {
            if !strategies.contains(&row.strategy) {
                strategies.push(row.strategy.clone());
            }
        }
        let medians = strategies
            .iter()
            .map(|strategy| {
                let group: Vec<&ComparisonRow> =
                    rows.iter().filter(|r| &r.strategy == strategy).collect();
                let collect = |f: fn(&ComparisonRow) -> f64| -> Vec<f64> {
                    group.iter().map(|r| f(r)).collect()
                };
                let top5: Vec<f64> = group.iter().filter_map(|r| r.top5_err).collect();
                MedianRow {
                    strategy: strategy.clone(),
                    top1_err: median(&collect(|r| r.top1_err)),
                    top5_err: if top5.len() == group.len() { Some(median(&top5)) } else { None },
                    ece: median(&collect(|r| r.ece)),
                    avg_conf: median(&collect(|r| r.avg_conf)),
                    best_val_epoch: median(&collect(|r| r.best_val_epoch as f64)),
                }
            })
            .collect();
        ComparisonTable { rows, medians }
    }
}

fn opt_to_field(v: Option<f64>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "N/A".to_string(),
    }
}

fn field_to_opt(v: &str, what: &str, line: usize) -> Result<Option<f64>> {
    if v.trim() == "N/A" {
        Ok(None)
    } else {
        parse_num(v, what, line).map(Some)
    }
}

pub fn write_comparison_csv(table: &ComparisonTable, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{COMPARISON_HEADER}")?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.strategy,
            r.seed,
            r.top1_err,
            opt_to_field(r.top5_err),
            r.ece,
            r.avg_conf,
            r.best_val_epoch
        )?;
    }
    for m in &table.medians {
        writeln!(
            w,
            "{},median,{},{},{},{},{}",
            m.strategy,
            m.top1_err,
            opt_to_field(m.top5_err),
            m.ece,
            m.avg_conf,
            m.best_val_epoch
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_comparison_csv(path: &Path) -> Result<ComparisonTable> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let (_, header) =
        lines.next().ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))?;
    if header? != COMPARISON_HEADER {
        return Err(Error::Parse(format!("{}: unexpected header", path.display())));
    }
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let mut fs = line.split(',');
        let strategy = field(&mut fs, "strategy", n)?.to_string();
        let seed_field = field(&mut fs, "seed", n)?;
        let top1_err = parse_num(field(&mut fs, "top1_err", n)?, "top1_err", n)?;
        let top5_err = field_to_opt(field(&mut fs, "top5_err", n)?, "top5_err", n)?;
        let ece = parse_num(field(&mut fs, "ece", n)?, "ece", n)?;
        let avg_conf = parse_num(field(&mut fs, "avg_conf", n)?, "avg_conf", n)?;
        let best = field(&mut fs, "best_val_epoch", n)?;
        if seed_field.trim() == "median" {
            medians.push(MedianRow {
                strategy,
                top1_err,
                top5_err,
                ece,
                avg_conf,
                best_val_epoch: parse_num(best, "best_val_epoch", n)?,
            });
        } else {
            rows.push(ComparisonRow {
                strategy,
                seed: parse_num(seed_field, "seed", n)?,
                top1_err,
                top5_err,
                ece,
                avg_conf,
                best_val_epoch: parse_num(best, "best_val_epoch", n)?,
            });
        }
    }
    Ok(ComparisonTable { rows, medians })
}

/// Embeddings CSV: `label,e_0..e_{h-1}`, one row per sample.
pub fn write_embeddings_csv(labels: &[usize], embeddings: &Mat, path: &Path) -> Result<()> {
    if labels.len() != embeddings.rows() {
        return Err(Error::Shape(format!(
            "{} labels vs {} embedding rows",
            labels.len(),
            embeddings.rows()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((0..embeddings.cols()).map(|j| format!("e_{j}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, &label) in labels.iter().enumerate() {
        let mut fields = vec![label.to_string()];
        fields.extend(embeddings.row(i).iter().map(|v| v.to_string()));
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn parse_embeddings_csv(path: &Path) -> Result<(Vec<usize>, Mat)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let (_, header) =
        lines.next().ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))?;
    let header = header?;
    let dim = header.split(',').count() - 1;
    if !header.starts_with("label,") || dim == 0 {
        return Err(Error::Parse(format!("{}: unexpected header", path.display())));
    }
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let mut fs = line.split(',');
        labels.push(parse_num(field(&mut fs, "label", n)?, "label", n)?);
        let mut count = 0;
        for v in fs {
            data.push(parse_num::<f64>(v, "embedding", n)?);
            count += 1;
        }
        if count != dim {
            return Err(Error::Parse(format!(
                "line {n}: {count} embedding fields, expected {dim}"
            )));
        }
    }
    let mat = Mat::from_vec(labels.len(), dim, data)?;
    Ok((labels, mat))
}

/// Self-contained summary of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub strategy: String,
    pub seed: u64,
    pub best_val_epoch: usize,
    pub val_report: CalibReport,
    pub test_report: CalibReport,
    pub checkpoint: String,
}

pub fn write_report_json(report: &RunReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Parse(format!("report serialization: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn parse_report_json(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
