//! Feed-forward regression network: ReLU hidden layers, linear output,
//! mean-squared-error loss, ADAM optimizer. Written from scratch on f64.
//!
//! Inputs and targets are standardized with statistics of the training
//! split; predictions are mapped back to raw units and returned without
//! clamping or symmetrization.

use std::path::Path;

use ndarray::linalg::general_mat_mul;
use ndarray::parallel::prelude::*;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Deserialize;

use crate::error::{CoreError, Result};
use crate::fsio::{atomic_write, push_f64_slice};
use crate::rng::stream_rng;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Layer widths. The default hidden stack halves from 1024 down to 256.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
}

impl MlpArchitecture {
    /// Standard architecture for a given feature length and state count:
    /// hidden layers [1024, 512, 256], output of n^2 + n regression targets.
    pub fn standard(q_count: usize, n_states: usize) -> Self {
        MlpArchitecture {
            input_dim: q_count,
            hidden_dims: vec![1024, 512, 256],
            output_dim: n_states * n_states + n_states,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim < 1 || self.output_dim < 1 {
            return Err(CoreError::invalid("input and output dims must be >= 1"));
        }
        if self.hidden_dims.iter().any(|d| *d < 1) {
            return Err(CoreError::invalid("hidden layer widths must be >= 1"));
        }
        Ok(())
    }

    /// Widths of consecutive affine maps: in -> h1 -> ... -> out.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for h in &self.hidden_dims {
            dims.push((prev, *h));
            prev = *h;
        }
        dims.push((prev, self.output_dim));
        dims
    }
}

/// One affine layer; `weight` is (fan_in x fan_out).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    fn zeros_like(&self) -> MlpParams {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Array2::zeros(l.weight.dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite()))
    }
}

/// Gradients mirror the parameter shapes.
pub type Gradients = MlpParams;

/// First/second-moment accumulators and the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub first_moment: MlpParams,
    pub second_moment: MlpParams,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        AdamState {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 1000,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(CoreError::invalid("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(CoreError::invalid("betas must lie in [0,1)"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(CoreError::invalid("epsilon must be positive"));
        }
        if self.batch_size == 0 {
            return Err(CoreError::invalid("batch_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(CoreError::invalid("epochs must be >= 1"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(CoreError::invalid("validation_fraction must be in (0,1)"));
        }
        Ok(())
    }
}

/// Per-dimension shift/scale fitted on the training split. Dimensions with
/// zero variance keep std 1 so they pass through unchanged.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    /// Fit on the rows of `data` (population standard deviation).
    pub fn fit(data: &ArrayView2<f64>) -> Result<Self> {
        let rows = data.nrows();
        if rows == 0 {
            return Err(CoreError::invalid("cannot fit a standardizer on zero rows"));
        }
        let cols = data.ncols();
        let mut mean = vec![0.0; cols];
        let mut std = vec![0.0; cols];
        for j in 0..cols {
            let col = data.column(j);
            let m = col.sum() / rows as f64;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / rows as f64;
            mean[j] = m;
            let s = var.sqrt();
            std[j] = if s > 0.0 { s } else { 1.0 };
        }
        Ok(Standardizer { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_matrix(&self, data: &ArrayView2<f64>) -> Array2<f64> {
        let mut out = data.to_owned();
        for mut row in out.rows_mut() {
            for j in 0..self.mean.len() {
                row[j] = (row[j] - self.mean[j]) / self.std[j];
            }
        }
        out
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| (v - self.mean[j]) / self.std[j])
            .collect()
    }

    pub fn invert_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| v * self.std[j] + self.mean[j])
            .collect()
    }
}

/// Row-parallel matrix product. Each output row is accumulated in a fixed
/// order, so results are identical for any worker count. One coarse chunk
/// per worker keeps the rhs cache-resident within each task; small products
/// skip the pool entirely.
fn par_matmul(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Array2<f64> {
    let (n, k) = a.dim();
    let (k2, m) = b.dim();
    assert_eq!(k, k2, "par_matmul dimension mismatch");
    let mut out = Array2::<f64>::zeros((n, m));
    if n == 0 {
        return out;
    }
    let threads = rayon::current_num_threads().max(1);
    let flops = n as f64 * k as f64 * m as f64;
    let chunk = n.div_ceil(threads);
    // Below 64 rows per worker the gemm kernel loses more efficiency than
    // the second core adds.
    if threads == 1 || chunk < 64 || flops < 2.0e6 {
        general_mat_mul(1.0, a, b, 0.0, &mut out.view_mut());
        return out;
    }
    out.axis_chunks_iter_mut(Axis(0), chunk)
        .into_par_iter()
        .zip(a.axis_chunks_iter(Axis(0), chunk).into_par_iter())
        .for_each(|(mut out_chunk, a_chunk)| {
            general_mat_mul(1.0, &a_chunk, b, 0.0, &mut out_chunk);
        });
    out
}

/// Kaiming-style initialization: weights ~ Normal(0, 2/fan_in), biases zero.
pub fn mlp_init(arch: &MlpArchitecture, seed: u64) -> Result<MlpParams> {
    arch.validate()?;
    let mut rng = stream_rng(seed, "mlp-init");
    let mut normal = move || -> f64 {
        // Box-Muller transform on two uniform draws.
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let mut layers = Vec::new();
    for (fan_in, fan_out) in arch.layer_dims() {
        let scale = (2.0 / fan_in as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((fan_in, fan_out), || normal() * scale);
        layers.push(Layer { weight, bias: Array1::zeros(fan_out) });
    }
    Ok(MlpParams { layers })
}

/// Activations after every layer, input first. Hidden layers apply ReLU,
/// the output layer is linear.
fn forward_batch(params: &MlpParams, x: &ArrayView2<f64>) -> Vec<Array2<f64>> {
    let depth = params.layers.len();
    let mut activations = Vec::with_capacity(depth + 1);
    activations.push(x.to_owned());
    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = par_matmul(&activations[l].view(), &layer.weight.view());
        for mut row in z.rows_mut() {
            row += &layer.bias;
        }
        if l + 1 < depth {
            z.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
        }
        activations.push(z);
    }
    activations
}

/// Single-sample forward pass on already-standardized features.
pub fn mlp_forward(params: &MlpParams, features: &[f64]) -> Result<Vec<f64>> {
    let input_dim = params
        .layers
        .first()
        .ok_or_else(|| CoreError::invalid("network has no layers"))?
        .weight
        .nrows();
    if features.len() != input_dim {
        return Err(CoreError::invalid(format!(
            "feature length {} does not match input dimension {input_dim}",
            features.len()
        )));
    }
    let x = Array2::from_shape_vec((1, input_dim), features.to_vec())
        .map_err(|e| CoreError::invalid(e.to_string()))?;
    let activations = forward_batch(params, &x.view());
    Ok(activations.last().unwrap().row(0).to_vec())
}

/// Exact gradients of the batch-mean MSE (averaged over samples and output
/// dimensions). Returns (gradients, batch MSE). The ReLU subgradient at 0
/// is taken as 0.
pub fn mlp_backward(
    params: &MlpParams,
    batch_features: &ArrayView2<f64>,
    batch_targets: &ArrayView2<f64>,
) -> Result<(Gradients, f64)> {
    let batch = batch_features.nrows();
    if batch == 0 {
        return Err(CoreError::invalid("empty batch"));
    }
    let out_dim = params.layers.last().unwrap().bias.len();
    if batch_targets.dim() != (batch, out_dim) {
        return Err(CoreError::invalid(format!(
            "target shape {:?} does not match ({batch}, {out_dim})",
            batch_targets.dim()
        )));
    }
    let activations = forward_batch(params, batch_features);
    let prediction = activations.last().unwrap();

    let diff = prediction - batch_targets;
    let denom = (batch * out_dim) as f64;
    let mse = diff.iter().map(|v| v * v).sum::<f64>() / denom;

    let mut grads = params.zeros_like();
    let mut delta = diff.mapv(|v| 2.0 * v / denom);
    for l in (0..params.layers.len()).rev() {
        let a_prev = &activations[l];
        grads.layers[l].weight = par_matmul(&a_prev.t(), &delta.view());
        grads.layers[l].bias = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut upstream = par_matmul(&delta.view(), &params.layers[l].weight.t());
            upstream.zip_mut_with(a_prev, |d, a| {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = upstream;
        }
    }
    Ok((grads, mse))
}

/// One bias-corrected ADAM update.
pub fn adam_step(
    params: &mut MlpParams,
    grads: &Gradients,
    state: &mut AdamState,
    config: &TrainConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for l in 0..params.layers.len() {
        let m = &mut state.first_moment.layers[l];
        let v = &mut state.second_moment.layers[l];
        let g = &grads.layers[l];
        let p = &mut params.layers[l];

        m.weight.zip_mut_with(&g.weight, |m, g| {
            *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        });
        v.weight.zip_mut_with(&g.weight, |v, g| {
            *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        });
        ndarray::Zip::from(&mut p.weight)
            .and(&m.weight)
            .and(&v.weight)
            .for_each(|p, m, v| {
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            });

        m.bias.zip_mut_with(&g.bias, |m, g| {
            *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        });
        v.bias.zip_mut_with(&g.bias, |v, g| {
            *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        });
        ndarray::Zip::from(&mut p.bias)
            .and(&m.bias)
            .and(&v.bias)
            .for_each(|p, m, v| {
                let m_hat = m / bc1;
                let v_hat = v / bc2;
                *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            });
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    /// Mean squared error over the training split, standardized targets.
    pub train_mse: f64,
    /// Validation MSE; tracks the training value when the split is empty.
    pub val_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters snapshotted at the best validation loss.
    pub params: MlpParams,
    pub feature_norm: Standardizer,
    pub target_norm: Standardizer,
    pub loss_history: Vec<EpochLoss>,
    pub best_epoch: usize,
}

fn mse_of(params: &MlpParams, x: &ArrayView2<f64>, y: &ArrayView2<f64>) -> f64 {
    let activations = forward_batch(params, x);
    let pred = activations.last().unwrap();
    let diff = pred - y;
    diff.iter().map(|v| v * v).sum::<f64>() / (y.nrows() * y.ncols()) as f64
}

/// Mini-batch ADAM training on raw features/targets.
///
/// The data is shuffled once with the config seed; the trailing
/// `validation_fraction` of the shuffle becomes the validation split and the
/// standardizers are fitted on the training split only. Epoch order is
/// reshuffled every epoch. When the validation split rounds to zero records,
/// validation metrics track the training split.
pub fn mlp_train(
    features: &Array2<f64>,
    targets: &Array2<f64>,
    arch: &MlpArchitecture,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    arch.validate()?;
    config.validate()?;
    let d = features.nrows();
    if d == 0 {
        return Err(CoreError::invalid("training dataset is empty"));
    }
    if targets.nrows() != d {
        return Err(CoreError::invalid("feature and target row counts differ"));
    }
    if features.ncols() != arch.input_dim {
        return Err(CoreError::invalid(format!(
            "feature dimension {} does not match architecture input {}",
            features.ncols(),
            arch.input_dim
        )));
    }
    if targets.ncols() != arch.output_dim {
        return Err(CoreError::invalid(format!(
            "target dimension {} does not match architecture output {}",
            targets.ncols(),
            arch.output_dim
        )));
    }

    let mut indices: Vec<usize> = (0..d).collect();
    let mut shuffle_rng = stream_rng(config.seed, "mlp-split");
    indices.shuffle(&mut shuffle_rng);
    let val_count = ((config.validation_fraction * d as f64).floor() as usize).min(d - 1);
    let train_idx = &indices[..d - val_count];
    let val_idx = &indices[d - val_count..];

    let train_features_raw = features.select(Axis(0), train_idx);
    let train_targets_raw = targets.select(Axis(0), train_idx);
    let feature_norm = Standardizer::fit(&train_features_raw.view())?;
    let target_norm = Standardizer::fit(&train_targets_raw.view())?;

    let x_train = feature_norm.apply_matrix(&train_features_raw.view());
    let y_train = target_norm.apply_matrix(&train_targets_raw.view());
    let (x_val, y_val) = if val_idx.is_empty() {
        (None, None)
    } else {
        let xv = feature_norm.apply_matrix(&features.select(Axis(0), val_idx).view());
        let yv = target_norm.apply_matrix(&targets.select(Axis(0), val_idx).view());
        (Some(xv), Some(yv))
    };

    let mut params = mlp_init(arch, config.seed)?;
    let mut state = AdamState::new(&params);
    let mut epoch_rng = stream_rng(config.seed, "mlp-epochs");

    let n_train = x_train.nrows();
    let batch_size = config.batch_size.min(n_train);
    let mut order: Vec<usize> = (0..n_train).collect();

    let mut best_params = params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut loss_history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut epoch_rng);
        let mut sq_sum = 0.0;
        for chunk in order.chunks(batch_size) {
            let bx = x_train.select(Axis(0), chunk);
            let by = y_train.select(Axis(0), chunk);
            let (grads, batch_mse) = mlp_backward(&params, &bx.view(), &by.view())?;
            sq_sum += batch_mse * (chunk.len() * arch.output_dim) as f64;
            adam_step(&mut params, &grads, &mut state, config);
        }
        let train_mse = sq_sum / (n_train * arch.output_dim) as f64;
        let val_mse = match (&x_val, &y_val) {
            (Some(xv), Some(yv)) => mse_of(&params, &xv.view(), &yv.view()),
            _ => train_mse,
        };
        if !train_mse.is_finite() || !val_mse.is_finite() {
            return Err(CoreError::Training {
                epoch,
                message: format!("loss diverged (train={train_mse}, val={val_mse})"),
            });
        }
        if val_mse < best_val {
            best_val = val_mse;
            best_epoch = epoch;
            best_params = params.clone();
        }
        loss_history.push(EpochLoss { train_mse, val_mse });
    }

    Ok(TrainOutcome {
        params: best_params,
        feature_norm,
        target_norm,
        loss_history,
        best_epoch,
    })
}

/// Raw-unit prediction: first n^2 outputs reshaped row-major into the
/// Hamiltonian block, the last n into the dephasing rates. No clamping, no
/// symmetrization.
pub fn mlp_predict(
    params: &MlpParams,
    feature_norm: &Standardizer,
    target_norm: &Standardizer,
    features: &[f64],
    n_states: usize,
) -> Result<(Array2<f64>, Vec<f64>)> {
    let out_dim = params.layers.last().map(|l| l.bias.len()).unwrap_or(0);
    if n_states * n_states + n_states != out_dim {
        return Err(CoreError::invalid(format!(
            "output dimension {out_dim} does not fit n_states = {n_states}"
        )));
    }
    if feature_norm.dim() != features.len() {
        return Err(CoreError::invalid("standardizer does not match feature length"));
    }
    let x = feature_norm.apply_row(features);
    let out_std = mlp_forward(params, &x)?;
    let out = target_norm.invert_row(&out_std);
    let h = Array2::from_shape_vec((n_states, n_states), out[..n_states * n_states].to_vec())
        .map_err(|e| CoreError::invalid(e.to_string()))?;
    let gamma = out[n_states * n_states..].to_vec();
    Ok((h, gamma))
}

/// Everything needed to run inference later: architecture, standardizers,
/// parameters, and the state count the network was trained for.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCheckpoint {
    pub n_states: usize,
    pub arch: MlpArchitecture,
    pub feature_norm: Standardizer,
    pub target_norm: Standardizer,
    pub params: MlpParams,
}

impl MlpCheckpoint {
    pub fn from_outcome(n_states: usize, arch: &MlpArchitecture, outcome: &TrainOutcome) -> Self {
        MlpCheckpoint {
            n_states,
            arch: arch.clone(),
            feature_norm: outcome.feature_norm.clone(),
            target_norm: outcome.target_norm.clone(),
            params: outcome.params.clone(),
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<(Array2<f64>, Vec<f64>)> {
        mlp_predict(
            &self.params,
            &self.feature_norm,
            &self.target_norm,
            features,
            self.n_states,
        )
    }
}

fn push_standardizer(out: &mut String, key: &str, norm: &Standardizer) {
    out.push_str(&format!("\"{key}_mean\":"));
    push_f64_slice(out, &norm.mean);
    out.push_str(&format!(",\"{key}_std\":"));
    push_f64_slice(out, &norm.std);
}

/// Serialize a checkpoint as a single JSON object with 17-significant-digit
/// floats, written atomically.
pub fn checkpoint_save(checkpoint: &MlpCheckpoint, path: &Path) -> Result<()> {
    if !checkpoint.params.all_finite() {
        return Err(CoreError::numeric("checkpoint parameters contain non-finite values"));
    }
    let mut out = String::new();
    out.push_str(&format!(
        "{{\"format_version\":{CHECKPOINT_FORMAT_VERSION},\"n_states\":{},\"input_dim\":{},\"hidden_dims\":[",
        checkpoint.n_states, checkpoint.arch.input_dim
    ));
    for (i, h) in checkpoint.arch.hidden_dims.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&h.to_string());
    }
    out.push_str(&format!("],\"output_dim\":{},", checkpoint.arch.output_dim));
    push_standardizer(&mut out, "feature", &checkpoint.feature_norm);
    out.push(',');
    push_standardizer(&mut out, "target", &checkpoint.target_norm);
    out.push_str(",\"layers\":[");
    for (i, layer) in checkpoint.params.layers.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("{\"weight\":[");
        for (r, row) in layer.weight.rows().into_iter().enumerate() {
            if r > 0 {
                out.push(',');
            }
            push_f64_slice(&mut out, row.as_slice().unwrap());
        }
        out.push_str("],\"bias\":");
        push_f64_slice(&mut out, layer.bias.as_slice().unwrap());
        out.push('}');
    }
    out.push_str("]}");
    atomic_write(path, out.as_bytes())
}

#[derive(Deserialize)]
struct LayerWire {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Deserialize)]
struct CheckpointWire {
    format_version: u32,
    n_states: usize,
    input_dim: usize,
    hidden_dims: Vec<usize>,
    output_dim: usize,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
    target_mean: Vec<f64>,
    target_std: Vec<f64>,
    layers: Vec<LayerWire>,
}

pub fn checkpoint_load(path: &Path) -> Result<MlpCheckpoint> {
    let text = std::fs::read_to_string(path)?;
    let wire: CheckpointWire = serde_json::from_str(&text)
        .map_err(|e| CoreError::Parse { line: 1, message: format!("invalid checkpoint: {e}") })?;
    if wire.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(CoreError::VersionMismatch {
            found: wire.format_version,
            expected: CHECKPOINT_FORMAT_VERSION,
        });
    }
    let arch = MlpArchitecture {
        input_dim: wire.input_dim,
        hidden_dims: wire.hidden_dims,
        output_dim: wire.output_dim,
    };
    arch.validate()?;
    if wire.n_states * wire.n_states + wire.n_states != arch.output_dim {
        return Err(CoreError::invariant(format!(
            "checkpoint output dimension {} does not fit n_states {}",
            arch.output_dim, wire.n_states
        )));
    }
    let dims = arch.layer_dims();
    if wire.layers.len() != dims.len() {
        return Err(CoreError::invariant(format!(
            "checkpoint has {} layers, architecture needs {}",
            wire.layers.len(),
            dims.len()
        )));
    }
    let mut layers = Vec::with_capacity(dims.len());
    for (layer, (fan_in, fan_out)) in wire.layers.into_iter().zip(dims) {
        if layer.weight.len() != fan_in
            || layer.weight.iter().any(|row| row.len() != fan_out)
            || layer.bias.len() != fan_out
        {
            return Err(CoreError::invariant(format!(
                "checkpoint layer shape does not match {fan_in}x{fan_out}"
            )));
        }
        let weight = Array2::from_shape_vec(
            (fan_in, fan_out),
            layer.weight.into_iter().flatten().collect(),
        )
        .map_err(|e| CoreError::invalid(e.to_string()))?;
        layers.push(Layer { weight, bias: Array1::from_vec(layer.bias) });
    }
    if wire.feature_mean.len() != arch.input_dim
        || wire.feature_std.len() != arch.input_dim
        || wire.target_mean.len() != arch.output_dim
        || wire.target_std.len() != arch.output_dim
    {
        return Err(CoreError::invariant("checkpoint standardizer shapes are wrong"));
    }
    Ok(MlpCheckpoint {
        n_states: wire.n_states,
        arch,
        feature_norm: Standardizer { mean: wire.feature_mean, std: wire.feature_std },
        target_norm: Standardizer { mean: wire.target_mean, std: wire.target_std },
        params: MlpParams { layers },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn tiny_arch() -> MlpArchitecture {
        MlpArchitecture { input_dim: 3, hidden_dims: vec![4], output_dim: 2 }
    }

    #[test]
    fn standard_architecture_matches_conventions() {
        let arch = MlpArchitecture::standard(200, 3);
        assert_eq!(arch.input_dim, 200);
        assert_eq!(arch.hidden_dims, vec![1024, 512, 256]);
        assert_eq!(arch.output_dim, 12);
    }

    #[test]
    fn init_biases_are_zero_and_seeds_reproduce() {
        let a = mlp_init(&tiny_arch(), 3).unwrap();
        let b = mlp_init(&tiny_arch(), 3).unwrap();
        let c = mlp_init(&tiny_arch(), 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for layer in &a.layers {
            assert!(layer.bias.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn init_weight_variance_tracks_fan_in() {
        let arch = MlpArchitecture { input_dim: 100, hidden_dims: vec![], output_dim: 100 };
        let params = mlp_init(&arch, 9).unwrap();
        let w = &params.layers[0].weight;
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let expected = 2.0 / 100.0;
        assert!(
            (var - expected).abs() < 0.1 * expected,
            "variance {var} outside 10% of {expected}"
        );
    }

    #[test]
    fn forward_with_zero_weights_returns_bias() {
        let mut params = mlp_init(&tiny_arch(), 1).unwrap();
        for layer in &mut params.layers {
            layer.weight.fill(0.0);
        }
        params.layers.last_mut().unwrap().bias.assign(&array![0.7, -0.2]);
        let out = mlp_forward(&params, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.7, -0.2]);
    }

    #[test]
    fn forward_hand_arithmetic_with_relu() {
        // 1 -> 1 -> 1 net: hidden weight -1 sends x=1 to ReLU(-1) = 0, so the
        // output is just the output bias.
        let params = MlpParams {
            layers: vec![
                Layer { weight: array![[-1.0]], bias: array![0.0] },
                Layer { weight: array![[2.0]], bias: array![1.0] },
            ],
        };
        let out = mlp_forward(&params, &[1.0]).unwrap();
        assert_eq!(out, vec![1.0]);
        // Positive path: x=3, w=2, b=1 -> 7 through the linear output layer.
        let linear = MlpParams {
            layers: vec![Layer { weight: array![[2.0]], bias: array![1.0] }],
        };
        assert_eq!(mlp_forward(&linear, &[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn forward_matches_independent_loop_evaluation() {
        let arch = MlpArchitecture { input_dim: 4, hidden_dims: vec![5, 3], output_dim: 2 };
        let params = mlp_init(&arch, 42).unwrap();
        let x = [0.3, -1.2, 0.7, 2.0];
        let got = mlp_forward(&params, &x).unwrap();

        // Straight-line reimplementation with scalar loops.
        let mut act: Vec<f64> = x.to_vec();
        for (l, layer) in params.layers.iter().enumerate() {
            let (fi, fo) = layer.weight.dim();
            let mut next = vec![0.0; fo];
            for j in 0..fo {
                let mut acc = layer.bias[j];
                for i in 0..fi {
                    acc += act[i] * layer.weight[[i, j]];
                }
                next[j] = if l + 1 < params.layers.len() { acc.max(0.0) } else { acc };
            }
            act = next;
        }
        for (g, e) in got.iter().zip(act.iter()) {
            assert_abs_diff_eq!(g, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_is_zero_when_predictions_match_targets() {
        let mut params = mlp_init(&tiny_arch(), 1).unwrap();
        for layer in &mut params.layers {
            layer.weight.fill(0.0);
        }
        params.layers.last_mut().unwrap().bias.assign(&array![0.5, 1.5]);
        let x = array![[0.1, 0.2, 0.3], [1.0, -1.0, 0.0]];
        let y = array![[0.5, 1.5], [0.5, 1.5]];
        let (grads, mse) = mlp_backward(&params, &x.view(), &y.view()).unwrap();
        assert_eq!(mse, 0.0);
        for layer in &grads.layers {
            assert!(layer.weight.iter().all(|v| *v == 0.0));
            assert!(layer.bias.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn scalar_linear_gradient_matches_calculus() {
        // Single affine map w x + b, one sample: dL/dw = 2 x (w x + b - y).
        let params = MlpParams {
            layers: vec![Layer { weight: array![[1.5]], bias: array![0.0] }],
        };
        let x = array![[2.0]];
        let y = array![[1.0]];
        let (grads, _) = mlp_backward(&params, &x.view(), &y.view()).unwrap();
        let expected = 2.0 * 2.0 * (1.5 * 2.0 - 1.0);
        assert_abs_diff_eq!(grads.layers[0].weight[[0, 0]], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(grads.layers[0].bias[0], 2.0 * (1.5 * 2.0 - 1.0), epsilon = 1e-12);
    }

    #[test]
    fn adam_leaves_params_unchanged_on_zero_gradient() {
        let params0 = mlp_init(&tiny_arch(), 5).unwrap();
        let mut params = params0.clone();
        let grads = params.zeros_like();
        let mut state = AdamState::new(&params);
        let config = TrainConfig::default();
        adam_step(&mut params, &grads, &mut state, &config);
        assert_eq!(params, params0);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn adam_first_step_matches_scalar_hand_trace() {
        let mut params = MlpParams {
            layers: vec![Layer { weight: array![[1.0]], bias: array![0.0] }],
        };
        let mut grads = params.zeros_like();
        grads.layers[0].weight[[0, 0]] = 0.3;
        let mut state = AdamState::new(&params);
        let config = TrainConfig { learning_rate: 0.01, ..TrainConfig::default() };
        adam_step(&mut params, &grads, &mut state, &config);

        // Hand trace of the recurrences at t=1 for g=0.3.
        let g = 0.3;
        let m = (1.0 - config.beta1) * g;
        let v = (1.0 - config.beta2) * g * g;
        let m_hat = m / (1.0 - config.beta1);
        let v_hat = v / (1.0 - config.beta2);
        let expected = 1.0 - config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        assert_abs_diff_eq!(params.layers[0].weight[[0, 0]], expected, epsilon = 1e-15);
    }

    #[test]
    fn adam_moves_monotonically_against_constant_gradient() {
        let mut params = MlpParams {
            layers: vec![Layer { weight: array![[0.0]], bias: array![0.0] }],
        };
        let mut grads = params.zeros_like();
        grads.layers[0].weight[[0, 0]] = 1.0;
        let mut state = AdamState::new(&params);
        let config = TrainConfig::default();
        let mut prev = 0.0;
        for _ in 0..10 {
            adam_step(&mut params, &grads, &mut state, &config);
            let w = params.layers[0].weight[[0, 0]];
            assert!(w < prev, "parameter must keep moving against the gradient");
            prev = w;
        }
    }

    #[test]
    fn standardizer_replaces_zero_variance_with_unit_scale() {
        let data = array![[1.0, 5.0], [1.0, 7.0]];
        let norm = Standardizer::fit(&data.view()).unwrap();
        assert_eq!(norm.std[0], 1.0);
        assert_abs_diff_eq!(norm.std[1], 1.0, epsilon = 1e-12);
        assert_eq!(norm.mean[0], 1.0);
    }

    #[test]
    fn predict_reshape_convention_is_row_major() {
        // Zero-weight net whose output biases are 0..n^2+n-1 in standardized
        // space with identity target norm: h[i][j] must equal i*n+j.
        let n = 2usize;
        let arch = MlpArchitecture { input_dim: 3, hidden_dims: vec![], output_dim: n * n + n };
        let mut params = mlp_init(&arch, 0).unwrap();
        params.layers[0].weight.fill(0.0);
        for (k, b) in params.layers[0].bias.iter_mut().enumerate() {
            *b = k as f64;
        }
        let fnorm = Standardizer::identity(3);
        let tnorm = Standardizer::identity(n * n + n);
        let (h, gamma) = mlp_predict(&params, &fnorm, &tnorm, &[0.0, 0.0, 0.0], n).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(h[[i, j]], (i * n + j) as f64);
            }
        }
        assert_eq!(gamma, vec![4.0, 5.0]);
    }

    #[test]
    fn checkpoint_round_trip_preserves_forward_exactly() {
        let arch = MlpArchitecture { input_dim: 6, hidden_dims: vec![8, 4], output_dim: 6 };
        let params = mlp_init(&arch, 13).unwrap();
        let checkpoint = MlpCheckpoint {
            n_states: 2,
            arch: arch.clone(),
            feature_norm: Standardizer::identity(6),
            target_norm: Standardizer::identity(6),
            params,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        checkpoint_save(&checkpoint, &path).unwrap();
        let loaded = checkpoint_load(&path).unwrap();
        assert_eq!(loaded, checkpoint);
        let x = [0.1, -0.4, 0.9, 2.0, -1.0, 0.3];
        assert_eq!(
            mlp_forward(&checkpoint.params, &x).unwrap(),
            mlp_forward(&loaded.params, &x).unwrap()
        );
    }

    #[test]
    fn corrupted_checkpoint_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.json");
        std::fs::write(&path, "{\"format_version\":1,\"n_states\":").unwrap();
        assert!(matches!(checkpoint_load(&path), Err(CoreError::Parse { .. })));
    }

    #[test]
    fn mismatched_state_count_is_refused() {
        let arch = MlpArchitecture { input_dim: 4, hidden_dims: vec![], output_dim: 12 };
        let checkpoint = MlpCheckpoint {
            n_states: 3,
            arch: arch.clone(),
            feature_norm: Standardizer::identity(4),
            target_norm: Standardizer::identity(12),
            params: mlp_init(&arch, 0).unwrap(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        checkpoint_save(&checkpoint, &path).unwrap();
        let loaded = checkpoint_load(&path).unwrap();
        // Evaluating as an N=4 model must fail the shape guard.
        let err = mlp_predict(
            &loaded.params,
            &loaded.feature_norm,
            &loaded.target_norm,
            &[0.0; 4],
            4,
        );
        assert!(err.is_err());
    }
}
