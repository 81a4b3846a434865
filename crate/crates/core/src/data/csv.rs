//! CSV dataset ingestion and emission.
//!
//! Format: UTF-8, one header row with `label` first and feature columns
//! after, then one row per sample. Features must already lie in `[-1, 1]`
//! unless the loader is asked to rescale them from their observed range.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{normalize_minus1_1, Dataset};
use crate::error::{Error, Result};
use crate::ndkernel::Mat;

/// Load a dataset from CSV. With `normalize` set, features are rescaled to
/// `[-1, 1]` from their observed global min/max; otherwise out-of-range
/// features are rejected.
pub fn load_csv(path: &Path, normalize: bool) -> Result<Dataset> {
    let reader = BufReader::new(
        File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?,
    );
    let mut lines = reader.lines();
    let header =
        lines.next().ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))??;
    let mut cols = header.split(',');
    match cols.next() {
        Some(first) if first.trim() == "label" => {}
        other => {
            return Err(Error::Parse(format!(
                "{}: first header column must be 'label', got {:?}",
                path.display(),
                other.unwrap_or("")
            )))
        }
    }
    let d = cols.count();
    if d == 0 {
        return Err(Error::Parse(format!("{}: no feature columns", path.display())));
    }

    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (line_no, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label_field = fields.next().unwrap_or("");
        let label: usize = label_field.trim().parse().map_err(|e| {
            Error::Parse(format!(
                "{}: line {}: bad label '{label_field}': {e}",
                path.display(),
                line_no + 2
            ))
        })?;
        labels.push(label);
        let mut row_len = 0;
        for field in fields {
            let v: f64 = field.trim().parse().map_err(|e| {
                Error::Parse(format!(
                    "{}: line {}: bad value '{field}': {e}",
                    path.display(),
                    line_no + 2
                ))
            })?;
            data.push(v);
            row_len += 1;
        }
        if row_len != d {
            return Err(Error::Parse(format!(
                "{}: line {}: {} feature fields, expected {d}",
                path.display(),
                line_no + 2,
                row_len
            )));
        }
    }
    if labels.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }

    let mut features = Mat::from_vec(labels.len(), d, data)?;
    if normalize {
        let lo = features.data().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = features.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        features = normalize_minus1_1(&features, lo, hi)?;
    }
    let k = labels.iter().copied().max().unwrap() + 1;
    Dataset::new(features, labels, k.max(2), None)
}

/// Write a dataset in the same CSV format (`label,f0,...,f{D-1}`).
pub fn write_dataset_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((0..ds.dim()).map(|j| format!("f{j}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for i in 0..ds.len() {
        let mut fields = vec![ds.labels()[i].to_string()];
        fields.extend(ds.features().row(i).iter().map(|v| v.to_string()));
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}
