//! IDX ingestion (the MNIST distribution format).
//!
//! Big-endian headers: magic 2051 for image files (`n, rows, cols` then
//! `n*rows*cols` unsigned bytes) and 2049 for label files (`n` then `n`
//! bytes). Pixels are mapped from `[0, 255]` to `[-1, 1]` and images are
//! flattened row-major to `D = rows * cols`.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::ndkernel::Mat;

const IMAGE_MAGIC: u32 = 2051;
const LABEL_MAGIC: u32 = 2049;

struct Cursor<R> {
    inner: R,
    offset: usize,
    path: String,
}

impl<R: Read> Cursor<R> {
    fn read_u32_be(&mut self) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.inner.read_exact(&mut buf).map_err(|e| {
            Error::Parse(format!("{}: read failed at offset {}: {e}", self.path, self.offset))
        })?;
        self.offset += 4;
        Ok(u32::from_be_bytes(buf))
    }

    fn read_bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| {
            Error::Parse(format!("{}: read failed at offset {}: {e}", self.path, self.offset))
        })?;
        self.offset += n;
        Ok(buf)
    }
}

fn open(path: &Path) -> Result<Cursor<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    Ok(Cursor { inner: BufReader::new(file), offset: 0, path: path.display().to_string() })
}

/// Load an image/label IDX pair into a dataset.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let mut images = open(images_path)?;
    let magic = images.read_u32_be()?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Parse(format!(
            "{}: bad image magic {magic} at offset 0, expected {IMAGE_MAGIC}",
            images.path
        )));
    }
    let n = images.read_u32_be()? as usize;
    let rows = images.read_u32_be()? as usize;
    let cols = images.read_u32_be()? as usize;
    if n == 0 || rows == 0 || cols == 0 {
        return Err(Error::Parse(format!(
            "{}: degenerate dimensions {n}x{rows}x{cols}",
            images.path
        )));
    }
    let pixels = images.read_bytes(n * rows * cols)?;

    let mut labels_file = open(labels_path)?;
    let magic = labels_file.read_u32_be()?;
    if magic != LABEL_MAGIC {
        return Err(Error::Parse(format!(
            "{}: bad label magic {magic} at offset 0, expected {LABEL_MAGIC}",
            labels_file.path
        )));
    }
    let n_labels = labels_file.read_u32_be()? as usize;
    if n_labels != n {
        return Err(Error::Parse(format!(
            "{}: {n_labels} labels for {n} images",
            labels_file.path
        )));
    }
    let raw_labels = labels_file.read_bytes(n)?;

    let d = rows * cols;
    let data: Vec<f64> = pixels.iter().map(|&p| 2.0 * (p as f64 / 255.0) - 1.0).collect();
    let features = Mat::from_vec(n, d, data)?;
    let labels: Vec<usize> = raw_labels.iter().map(|&l| l as usize).collect();
    let k = labels.iter().copied().max().unwrap() + 1;
    Dataset::new(features, labels, k.max(2), None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("ols_core_idx_tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn write_images(name: &str, n: u32, rows: u32, cols: u32, pixels: &[u8]) -> std::path::PathBuf {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&n.to_be_bytes());
        bytes.extend_from_slice(&rows.to_be_bytes());
        bytes.extend_from_slice(&cols.to_be_bytes());
        bytes.extend_from_slice(pixels);
        let path = tmp(name);
        std::fs::write(&path, bytes).unwrap();
        path
    }

    fn write_labels(name: &str, labels: &[u8]) -> std::path::PathBuf {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        bytes.extend_from_slice(labels);
        let path = tmp(name);
        std::fs::write(&path, bytes).unwrap();
        path
    }

    #[test]
    fn decodes_hand_crafted_fixture() {
        let pixels = [0u8, 255, 51, 102, 10, 20, 30, 40];
        let images = write_images("fixture-images", 2, 2, 2, &pixels);
        let labels = write_labels("fixture-labels", &[1, 0]);
        let ds = load_idx(&images, &labels).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.labels(), &[1, 0]);
        let row0 = ds.features().row(0);
        assert_eq!(row0[0], -1.0);
        assert_eq!(row0[1], 1.0);
        assert!((row0[2] - (-0.6)).abs() < 1e-12);
        assert!((row0[3] - (-0.2)).abs() < 1e-12);
    }

    #[test]
    fn rejects_label_count_mismatch() {
        let images = write_images("mismatch-images", 2, 2, 2, &[0u8; 8]);
        let labels = write_labels("mismatch-labels", &[1, 0, 1]);
        assert!(load_idx(&images, &labels).is_err());
    }

    #[test]
    fn rejects_bad_magic() {
        let path = tmp("bad-magic");
        std::fs::write(&path, 1234u32.to_be_bytes()).unwrap();
        let labels = write_labels("bad-magic-labels", &[0]);
        let err = load_idx(&path, &labels).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn rejects_truncated_pixels() {
        let images = write_images("short-images", 2, 2, 2, &[0u8; 5]);
        let labels = write_labels("short-labels", &[1, 0]);
        let err = load_idx(&images, &labels).unwrap_err();
        assert!(err.to_string().contains("offset"), "{err}");
    }
}
