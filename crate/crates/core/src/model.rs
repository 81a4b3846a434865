//! A plain multilayer perceptron with manual backpropagation.
//!
//! The classifier is a chain of affine layers with ReLU between them; the
//! final affine output is the logits. Gradients are exact reverse-mode
//! derivatives, averaged over the mini-batch to match the batch-mean loss
//! convention (learning-rate semantics independent of batch size).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ndkernel::{matmul, relu, relu_mask, Mat};
use crate::rng::Rng;

const CHECKPOINT_MAGIC: &[u8; 8] = b"OLSCKPT\0";
const CHECKPOINT_VERSION: u32 = 1;

/// Weights and biases of the MLP. `layer_sizes = [D, h1, ..., hL, K]`; layer
/// `l` maps `layer_sizes[l] -> layer_sizes[l+1]` with weight matrix
/// `size[l] x size[l+1]` and a bias vector of length `size[l+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Mat>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpParams {
    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Width of the last hidden layer, if there is one.
    pub fn penultimate_dim(&self) -> Option<usize> {
        if self.layer_sizes.len() >= 3 {
            Some(self.layer_sizes[self.layer_sizes.len() - 2])
        } else {
            None
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_layer_sizes(&self.layer_sizes)?;
        let n_layers = self.layer_sizes.len() - 1;
        if self.weights.len() != n_layers || self.biases.len() != n_layers {
            return Err(Error::Shape(format!(
                "expected {n_layers} weight/bias pairs, got {}/{}",
                self.weights.len(),
                self.biases.len()
            )));
        }
        for l in 0..n_layers {
            let (rows, cols) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            if self.weights[l].rows() != rows || self.weights[l].cols() != cols {
                return Err(Error::Shape(format!(
                    "layer {l}: weight is {}x{}, expected {rows}x{cols}",
                    self.weights[l].rows(),
                    self.weights[l].cols()
                )));
            }
            if self.biases[l].len() != cols {
                return Err(Error::Shape(format!(
                    "layer {l}: bias length {}, expected {cols}",
                    self.biases[l].len()
                )));
            }
            if !self.weights[l].is_finite() || self.biases[l].iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("layer {l}: non-finite parameter")));
            }
        }
        Ok(())
    }
}

fn validate_layer_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidArgument(
            "layer_sizes needs at least input and output (2 entries)".into(),
        ));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::InvalidArgument("layer sizes must be positive".into()));
    }
    Ok(())
}

/// Everything the backward pass needs from one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer: `activations[0]` is the batch, `activations[l]`
    /// for `l > 0` is the ReLU output feeding layer `l`.
    pub activations: Vec<Mat>,
    /// Pre-activation output of each layer; the last one is the logits.
    pub pre_activations: Vec<Mat>,
}

impl ForwardCache {
    pub fn logits(&self) -> &Mat {
        self.pre_activations.last().unwrap()
    }

    /// Activation of the last hidden layer (input to the output layer).
    pub fn penultimate(&self) -> &Mat {
        self.activations.last().unwrap()
    }
}

/// Per-layer gradients, shape-congruent with [`MlpParams`].
#[derive(Debug, Clone)]
pub struct Grads {
    pub weights: Vec<Mat>,
    pub biases: Vec<Vec<f64>>,
}

/// Draw initial parameters: weights are zero-mean Gaussian scaled by
/// `1/sqrt(fan_in)`, biases zero, fully determined by the seed.
pub fn init_params(layer_sizes: &[usize], seed: u64) -> Result<MlpParams> {
    validate_layer_sizes(layer_sizes)?;
    let mut rng = Rng::seed_from(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..layer_sizes.len() - 1 {
        let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
        let scale = 1.0 / (fan_in as f64).sqrt();
        let data: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.next_gaussian() * scale).collect();
        weights.push(Mat::from_vec(fan_in, fan_out, data)?);
        biases.push(vec![0.0; fan_out]);
    }
    Ok(MlpParams { layer_sizes: layer_sizes.to_vec(), weights, biases })
}

fn add_bias_rows(m: &mut Mat, bias: &[f64]) {
    for i in 0..m.rows() {
        for (v, &b) in m.row_mut(i).iter_mut().zip(bias.iter()) {
            *v += b;
        }
    }
}

/// Run the affine/ReLU chain over a batch, keeping every intermediate.
pub fn forward(params: &MlpParams, batch: &Mat) -> Result<ForwardCache> {
    if batch.cols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "batch has {} features, model expects {}",
            batch.cols(),
            params.input_dim()
        )));
    }
    let n_layers = params.num_layers();
    let mut activations = Vec::with_capacity(n_layers);
    let mut pre_activations = Vec::with_capacity(n_layers);
    let mut x = batch.clone();
    for l in 0..n_layers {
        let mut z = matmul(&x, &params.weights[l])?;
        add_bias_rows(&mut z, &params.biases[l]);
        activations.push(x);
        let is_last = l == n_layers - 1;
        x = if is_last { z.clone() } else { relu(&z) };
        pre_activations.push(z);
    }
    Ok(ForwardCache { activations, pre_activations })
}

/// Exact reverse-mode gradients of the forward chain. `dlogits` holds one
/// row per sample (the per-sample loss gradient at the logits); the result
/// is averaged over the batch.
pub fn backward(params: &MlpParams, cache: &ForwardCache, dlogits: &Mat) -> Result<Grads> {
    let logits = cache.logits();
    if dlogits.rows() != logits.rows() || dlogits.cols() != logits.cols() {
        return Err(Error::Shape(format!(
            "dlogits is {}x{}, logits are {}x{}",
            dlogits.rows(),
            dlogits.cols(),
            logits.rows(),
            logits.cols()
        )));
    }
    let n = dlogits.rows() as f64;
    let n_layers = params.num_layers();
    let mut d_weights = vec![Mat::zeros(1, 1); n_layers];
    let mut d_biases = vec![Vec::new(); n_layers];

    let mut delta = dlogits.clone();
    for l in (0..n_layers).rev() {
        let input = &cache.activations[l];
        let mut dw = matmul(&input.transpose(), &delta)?;
        for v in dw.data_mut() {
            *v /= n;
        }
        let mut db = vec![0.0; delta.cols()];
        for i in 0..delta.rows() {
            for (acc, &v) in db.iter_mut().zip(delta.row(i).iter()) {
                *acc += v;
            }
        }
        for v in db.iter_mut() {
            *v /= n;
        }
        d_weights[l] = dw;
        d_biases[l] = db;

        if l > 0 {
            let mut upstream = matmul(&delta, &params.weights[l].transpose())?;
            let mask = relu_mask(&cache.pre_activations[l - 1]);
            for (u, &m) in upstream.data_mut().iter_mut().zip(mask.data().iter()) {
                *u *= m;
            }
            delta = upstream;
        }
    }
    Ok(Grads { weights: d_weights, biases: d_biases })
}

/// Last hidden activation per sample. Rejected for models without a hidden
/// layer (there is no penultimate representation to export).
pub fn penultimate_embeddings(params: &MlpParams, batch: &Mat) -> Result<Mat> {
    if params.penultimate_dim().is_none() {
        return Err(Error::InvalidArgument(
            "model has no hidden layer, so no penultimate embeddings exist".into(),
        ));
    }
    Ok(forward(params, batch)?.penultimate().clone())
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64_slice<W: Write>(w: &mut W, vs: &[f64]) -> Result<()> {
    for &v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64_vec<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

/// Serialize parameters: magic, format version, layer sizes, then each
/// layer's weights (row-major) and biases as little-endian `f64`. The
/// encoding is exact, so a round trip is bitwise.
pub fn save_checkpoint<W: Write>(params: &MlpParams, w: &mut W) -> Result<()> {
    params.validate()?;
    w.write_all(CHECKPOINT_MAGIC)?;
    write_u32(w, CHECKPOINT_VERSION)?;
    write_u32(w, params.layer_sizes.len() as u32)?;
    for &s in &params.layer_sizes {
        write_u32(w, s as u32)?;
    }
    for l in 0..params.num_layers() {
        write_f64_slice(w, params.weights[l].data())?;
        write_f64_slice(w, &params.biases[l])?;
    }
    Ok(())
}

pub fn load_checkpoint<R: Read>(r: &mut R) -> Result<MlpParams> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Parse("bad checkpoint magic at offset 0".into()));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Parse(format!("unsupported checkpoint version {version} at offset 8")));
    }
    let n_sizes = read_u32(r)? as usize;
    if n_sizes < 2 {
        return Err(Error::Parse(format!("checkpoint has {n_sizes} layer sizes, need >= 2")));
    }
    let mut layer_sizes = Vec::with_capacity(n_sizes);
    for _ in 0..n_sizes {
        layer_sizes.push(read_u32(r)? as usize);
    }
    validate_layer_sizes(&layer_sizes)
        .map_err(|e| Error::Parse(format!("checkpoint layer sizes invalid: {e}")))?;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..n_sizes - 1 {
        let (rows, cols) = (layer_sizes[l], layer_sizes[l + 1]);
        let w = read_f64_vec(r, rows * cols)?;
        weights.push(Mat::from_vec(rows, cols, w)?);
        biases.push(read_f64_vec(r, cols)?);
    }
    let params = MlpParams { layer_sizes, weights, biases };
    params.validate()?;
    Ok(params)
}

pub fn save_checkpoint_file(params: &MlpParams, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    save_checkpoint(params, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint_file(path: &Path) -> Result<MlpParams> {
    let mut r = BufReader::new(File::open(path)?);
    load_checkpoint(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndkernel::softmax_rows;
    use crate::objective::{grad_logits, loss_combined};

    fn random_batch(rng: &mut Rng, n: usize, d: usize) -> Mat {
        Mat::from_vec(n, d, (0..n * d).map(|_| rng.next_gaussian()).collect()).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(&[4, 8, 3], 42).unwrap();
        let b = init_params(&[4, 8, 3], 42).unwrap();
        assert_eq!(a, b);
        let c = init_params(&[4, 8, 3], 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_biases_are_zero() {
        let p = init_params(&[5, 7, 2], 1).unwrap();
        for b in &p.biases {
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn init_weight_variance_matches_fan_in_scale() {
        let p = init_params(&[100, 100], 7).unwrap();
        let data = p.weights[0].data();
        let mean: f64 = data.iter().sum::<f64>() / data.len() as f64;
        let var: f64 =
            data.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / data.len() as f64;
        let expected = 1.0 / 100.0;
        assert!((var - expected).abs() / expected < 0.2, "variance {var} vs expected {expected}");
    }

    #[test]
    fn init_rejects_bad_layer_sizes() {
        assert!(init_params(&[4], 0).is_err());
        assert!(init_params(&[4, 0, 2], 0).is_err());
        assert!(init_params(&[], 0).is_err());
    }

    #[test]
    fn forward_zero_params_gives_uniform_probs() {
        let mut p = init_params(&[3, 4, 2], 0).unwrap();
        for w in p.weights.iter_mut() {
            w.data_mut().fill(0.0);
        }
        let mut rng = Rng::seed_from(2);
        let batch = random_batch(&mut rng, 5, 3);
        let cache = forward(&p, &batch).unwrap();
        assert!(cache.logits().data().iter().all(|&v| v == 0.0));
        let probs = softmax_rows(cache.logits());
        assert!(probs.data().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn forward_single_layer_is_affine() {
        let mut rng = Rng::seed_from(3);
        let p = init_params(&[3, 2], 9).unwrap();
        let batch = random_batch(&mut rng, 4, 3);
        let cache = forward(&p, &batch).unwrap();
        let mut expected = matmul(&batch, &p.weights[0]).unwrap();
        add_bias_rows(&mut expected, &p.biases[0]);
        assert_eq!(cache.logits(), &expected);
    }

    #[test]
    fn forward_matches_straight_line_recomputation() {
        let mut rng = Rng::seed_from(4);
        let p = init_params(&[4, 6, 5, 3], 11).unwrap();
        let batch = random_batch(&mut rng, 3, 4);
        let cache = forward(&p, &batch).unwrap();

        // Independent recomputation without the cache bookkeeping.
        let mut x = batch.clone();
        for l in 0..p.num_layers() {
            let mut z = matmul(&x, &p.weights[l]).unwrap();
            add_bias_rows(&mut z, &p.biases[l]);
            x = if l == p.num_layers() - 1 { z } else { relu(&z) };
        }
        assert_eq!(cache.logits(), &x);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = init_params(&[3, 2], 0).unwrap();
        let batch = Mat::zeros(2, 4);
        assert!(forward(&p, &batch).is_err());
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let p = init_params(&[5, 8, 4], 21).unwrap();
        let mut rng = Rng::seed_from(5);
        let batch = random_batch(&mut rng, 6, 5);
        let a = forward(&p, &batch).unwrap();
        let b = forward(&p, &batch).unwrap();
        assert_eq!(a.logits(), b.logits());
    }

    #[test]
    fn backward_zero_upstream_gives_zero_grads() {
        let p = init_params(&[3, 4, 2], 1).unwrap();
        let mut rng = Rng::seed_from(6);
        let batch = random_batch(&mut rng, 4, 3);
        let cache = forward(&p, &batch).unwrap();
        let dlogits = Mat::zeros(4, 2);
        let grads = backward(&p, &cache, &dlogits).unwrap();
        for w in &grads.weights {
            assert!(w.data().iter().all(|&v| v == 0.0));
        }
        for b in &grads.biases {
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn backward_single_layer_hand_derivation() {
        let p = init_params(&[3, 2], 5).unwrap();
        let mut rng = Rng::seed_from(7);
        let batch = random_batch(&mut rng, 4, 3);
        let cache = forward(&p, &batch).unwrap();
        let dlogits = random_batch(&mut rng, 4, 2);
        let grads = backward(&p, &cache, &dlogits).unwrap();
        let mut expected = matmul(&batch.transpose(), &dlogits).unwrap();
        for v in expected.data_mut() {
            *v /= 4.0;
        }
        assert_eq!(grads.weights[0], expected);
    }

    #[test]
    fn backward_rejects_shape_mismatch() {
        let p = init_params(&[3, 4, 2], 1).unwrap();
        let mut rng = Rng::seed_from(8);
        let batch = random_batch(&mut rng, 4, 3);
        let cache = forward(&p, &batch).unwrap();
        assert!(backward(&p, &cache, &Mat::zeros(4, 3)).is_err());
        assert!(backward(&p, &cache, &Mat::zeros(3, 2)).is_err());
    }

    /// Batch-mean combined loss as a pure function of the parameters, used as
    /// the finite-difference oracle.
    fn batch_loss(
        params: &MlpParams,
        batch: &Mat,
        labels: &[usize],
        targets: &[Vec<f64>],
        alpha: f64,
    ) -> f64 {
        let cache = forward(params, batch).unwrap();
        let probs = softmax_rows(cache.logits());
        let mut total = 0.0;
        for i in 0..batch.rows() {
            total += loss_combined(probs.row(i), labels[i], &targets[i], alpha).unwrap().l_total;
        }
        total / batch.rows() as f64
    }

    fn perturbed(
        params: &MlpParams,
        layer: usize,
        flat_idx: usize,
        is_bias: bool,
        h: f64,
    ) -> MlpParams {
        let mut p = params.clone();
        if is_bias {
            p.biases[layer][flat_idx] += h;
        } else {
            p.weights[layer].data_mut()[flat_idx] += h;
        }
        p
    }

    #[test]
    fn gradient_check_against_central_differences() {
        let mut rng = Rng::seed_from(99);
        let h = 1e-5;
        for instance in 0..5 {
            let k = 3;
            let p = init_params(&[4, 6, 5, k], 100 + instance).unwrap();
            let batch = random_batch(&mut rng, 3, 4);
            let labels: Vec<usize> = (0..3).map(|_| rng.next_below(k)).collect();
            let alpha = rng.next_f64();
            let targets: Vec<Vec<f64>> = (0..3)
                .map(|_| {
                    let mut t: Vec<f64> = (0..k).map(|_| rng.next_f64() + 1e-2).collect();
                    let s: f64 = t.iter().sum();
                    t.iter_mut().for_each(|v| *v /= s);
                    t
                })
                .collect();

            let cache = forward(&p, &batch).unwrap();
            let probs = softmax_rows(cache.logits());
            let mut dlogits = Mat::zeros(3, k);
            for i in 0..3 {
                let g = grad_logits(probs.row(i), labels[i], &targets[i], alpha).unwrap();
                dlogits.row_mut(i).copy_from_slice(&g);
            }
            let grads = backward(&p, &cache, &dlogits).unwrap();

            for l in 0..p.num_layers() {
                for idx in 0..p.weights[l].data().len() {
                    let analytic = grads.weights[l].data()[idx];
                    if analytic.abs() <= 1e-8 {
                        continue;
                    }
                    let lp = batch_loss(
                        &perturbed(&p, l, idx, false, h),
                        &batch,
                        &labels,
                        &targets,
                        alpha,
                    );
                    let lm = batch_loss(
                        &perturbed(&p, l, idx, false, -h),
                        &batch,
                        &labels,
                        &targets,
                        alpha,
                    );
                    let fd = (lp - lm) / (2.0 * h);
                    let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs());
                    assert!(rel < 1e-5, "layer {l} weight {idx}: {analytic} vs {fd} (rel {rel})");
                }
                for idx in 0..p.biases[l].len() {
                    let analytic = grads.biases[l][idx];
                    if analytic.abs() <= 1e-8 {
                        continue;
                    }
                    let lp = batch_loss(
                        &perturbed(&p, l, idx, true, h),
                        &batch,
                        &labels,
                        &targets,
                        alpha,
                    );
                    let lm = batch_loss(
                        &perturbed(&p, l, idx, true, -h),
                        &batch,
                        &labels,
                        &targets,
                        alpha,
                    );
                    let fd = (lp - lm) / (2.0 * h);
                    let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs());
                    assert!(rel < 1e-5, "layer {l} bias {idx}: {analytic} vs {fd} (rel {rel})");
                }
            }
        }
    }

    #[test]
    fn penultimate_embeddings_contract() {
        let p = init_params(&[4, 6, 3, 2], 1).unwrap();
        let mut rng = Rng::seed_from(10);
        let batch = random_batch(&mut rng, 5, 4);
        let emb = penultimate_embeddings(&p, &batch).unwrap();
        assert_eq!(emb.rows(), 5);
        assert_eq!(emb.cols(), 3);
        let cache = forward(&p, &batch).unwrap();
        assert_eq!(&emb, cache.penultimate());

        let flat = init_params(&[4, 2], 1).unwrap();
        assert!(penultimate_embeddings(&flat, &batch).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let p = init_params(&[7, 5, 4, 3], 1234).unwrap();
        let mut buf = Vec::new();
        save_checkpoint(&p, &mut buf).unwrap();
        let loaded = load_checkpoint(&mut &buf[..]).unwrap();
        assert_eq!(p, loaded);
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        let mut r: &[u8] = b"NOTMAGIC garbage bytes here";
        assert!(load_checkpoint(&mut r).is_err());
        let p = init_params(&[3, 2], 0).unwrap();
        let mut buf = Vec::new();
        save_checkpoint(&p, &mut buf).unwrap();
        buf[8] = 99; // corrupt the version field
        assert!(load_checkpoint(&mut &buf[..]).is_err());
        let mut truncated = Vec::new();
        save_checkpoint(&p, &mut truncated).unwrap();
        truncated.truncate(truncated.len() - 4);
        assert!(load_checkpoint(&mut &truncated[..]).is_err());
    }
}
