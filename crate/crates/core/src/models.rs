//! Small differentiable classifiers: linear softmax and one-hidden-layer
//! ReLU MLPs, with explicit forward and backward passes for the (optionally
//! per-sample weighted) mean cross-entropy loss.
//!
//! # Checkpoint format
//!
//! Checkpoints are UTF-8 text:
//!
//! ```text
//! forgeset-model 1
//! activation relu|identity
//! layers <L>
//! layer <fan_in> <fan_out>
//! <fan_in * fan_out weights, row-major, space separated>
//! <fan_out biases, space separated>
//! ...                        (one block per layer)
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a
//! save/load cycle reproduces every bit.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{sign, Matrix, RngStream};

const CHECKPOINT_MAGIC: &str = "forgeset-model 1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

/// Which parameter blocks receive gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    All,
    LastLayer,
}

/// Dense layer computing `x W + b`; `weight` is `fan_in x fan_out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { weight: Matrix::zeros(fan_in, fan_out), bias: vec![0.0; fan_out] }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weight.as_slice().iter().chain(self.bias.iter())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.as_mut_slice().iter_mut().chain(self.bias.iter_mut())
    }
}

/// Classifier parameters. `activation` is applied after every layer except
/// the last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

/// Gradient with the same block structure as a [`ModelParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradParams {
    pub layers: Vec<Layer>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    /// Mean of `per_sample`.
    pub total: f64,
    /// Weighted per-sample losses `weight_i * ce_i`.
    pub per_sample: Vec<f64>,
}

/// Glorot-uniform weights, zero biases. Hidden layers use ReLU.
pub fn init_params(sizes: &[usize], rng: RngStream) -> Result<ModelParams> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::BadSpec(format!("layer sizes {sizes:?}: need >= 2 positive sizes")));
    }
    let mut r = rng.rng();
    let layers = sizes
        .windows(2)
        .map(|pair| {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = glorot_bound(fan_in, fan_out);
            let data = (0..fan_in * fan_out).map(|_| r.random_range(-bound..=bound)).collect();
            Layer { weight: Matrix::from_vec(fan_in, fan_out, data).unwrap(), bias: vec![0.0; fan_out] }
        })
        .collect();
    Ok(ModelParams { layers, activation: Activation::Relu })
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl ModelParams {
    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().fan_out()
    }

    /// `[input, hidden..., classes]`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(Layer::fan_out));
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::BadSpec("model has no layers".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.bias.len() != l.fan_out() {
                return Err(Error::Shape(format!("layer {i}: bias length {} != {}", l.bias.len(), l.fan_out())));
            }
            if i > 0 && self.layers[i - 1].fan_out() != l.fan_in() {
                return Err(Error::Shape(format!("layer {i} does not chain with layer {}", i - 1)));
            }
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.as_slice().len() + l.bias.len()).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Layer::values)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Layer::values_mut)
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn l1_norm(&self) -> f64 {
        self.values().map(|v| v.abs()).sum()
    }

    /// `self -= lr * grad`.
    pub fn descend(&mut self, lr: f64, grad: &GradParams) {
        for (p, g) in self.values_mut().zip(grad.values()) {
            *p -= lr * g;
        }
    }

    /// `self -= beta * sign(grad)`.
    pub fn sign_descend(&mut self, beta: f64, grad: &GradParams) {
        for (p, g) in self.values_mut().zip(grad.values()) {
            *p -= beta * sign(*g);
        }
    }

    pub fn zero_grad(&self) -> GradParams {
        GradParams {
            layers: self.layers.iter().map(|l| Layer::zeros(l.fan_in(), l.fan_out())).collect(),
        }
    }

    pub fn to_checkpoint_string(&self) -> String {
        let mut out = String::new();
        let act = match self.activation {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        };
        writeln!(out, "{CHECKPOINT_MAGIC}").unwrap();
        writeln!(out, "activation {act}").unwrap();
        writeln!(out, "layers {}", self.layers.len()).unwrap();
        for l in &self.layers {
            writeln!(out, "layer {} {}", l.fan_in(), l.fan_out()).unwrap();
            writeln!(out, "{}", join_floats(l.weight.as_slice())).unwrap();
            writeln!(out, "{}", join_floats(&l.bias)).unwrap();
        }
        out
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| Error::Parse { row: 0, column: what.into(), message: "unexpected end of checkpoint".into() })
        };
        let bad = |row: usize, column: &str, message: String| Error::Parse { row, column: column.into(), message };

        let (row, magic) = next("header")?;
        if magic.trim() != CHECKPOINT_MAGIC {
            return Err(bad(row, "header", format!("expected '{CHECKPOINT_MAGIC}'")));
        }
        let (row, act) = next("activation")?;
        let activation = match act.trim() {
            "activation relu" => Activation::Relu,
            "activation identity" => Activation::Identity,
            other => return Err(bad(row, "activation", format!("unknown activation line '{other}'"))),
        };
        let (row, count) = next("layers")?;
        let count: usize = count
            .trim()
            .strip_prefix("layers ")
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad(row, "layers", "expected 'layers <count>'".into()))?;

        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let (row, head) = next("layer")?;
            let dims: Vec<usize> = head
                .trim()
                .strip_prefix("layer ")
                .map(|s| s.split_whitespace().filter_map(|t| t.parse().ok()).collect())
                .unwrap_or_default();
            if dims.len() != 2 {
                return Err(bad(row, "layer", "expected 'layer <fan_in> <fan_out>'".into()));
            }
            let (row, w) = next("weights")?;
            let w = parse_floats(w, row, "weights")?;
            let (row_b, b) = next("bias")?;
            let b = parse_floats(b, row_b, "bias")?;
            if b.len() != dims[1] {
                return Err(bad(row_b, "bias", format!("expected {} values, got {}", dims[1], b.len())));
            }
            let weight = Matrix::from_vec(dims[0], dims[1], w).map_err(|e| bad(row, "weights", e.to_string()))?;
            layers.push(Layer { weight, bias: b });
        }
        let params = ModelParams { layers, activation };
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint_str(&std::fs::read_to_string(path)?)
    }
}

impl GradParams {
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Layer::values)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Layer::values_mut)
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &GradParams) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += alpha * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }
}

fn join_floats(v: &[f64]) -> String {
    let mut s = String::with_capacity(v.len() * 20);
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{x:?}").unwrap();
    }
    s
}

fn parse_floats(line: &str, row: usize, column: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { row, column: column.into(), message: format!("bad number '{t}'") })
        })
        .collect()
}

struct ForwardCache {
    /// Inputs to each layer (`acts[0]` is the batch itself).
    acts: Vec<Matrix>,
    /// Pre-activation outputs of each layer.
    pre: Vec<Matrix>,
}

fn forward_cached(params: &ModelParams, x: &Matrix) -> Result<ForwardCache> {
    if x.cols() != params.input_dim() {
        return Err(Error::Shape(format!("input has {} features, model expects {}", x.cols(), params.input_dim())));
    }
    let n_layers = params.layers.len();
    let mut acts = Vec::with_capacity(n_layers);
    let mut pre = Vec::with_capacity(n_layers);
    let mut cur = x.clone();
    for (li, layer) in params.layers.iter().enumerate() {
        let mut z = cur.matmul(&layer.weight)?;
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                *v += b;
            }
        }
        let next = if li + 1 < n_layers && params.activation == Activation::Relu {
            let mut a = z.clone();
            a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            a
        } else {
            z.clone()
        };
        acts.push(cur);
        pre.push(z);
        cur = next;
    }
    Ok(ForwardCache { acts, pre })
}

/// Logits for a batch, `x.rows() x num_classes`.
pub fn forward(params: &ModelParams, x: &Matrix) -> Result<Matrix> {
    let mut cache = forward_cached(params, x)?;
    Ok(cache.pre.pop().unwrap())
}

/// Numerically stable softmax of one logit row.
pub fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]` computed via log-sum-exp.
pub fn cross_entropy_row(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

fn check_labels(y: &[usize], rows: usize, classes: usize) -> Result<()> {
    if y.len() != rows {
        return Err(Error::Shape(format!("{} labels for {rows} rows", y.len())));
    }
    if let Some(&label) = y.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// Unweighted cross-entropy of every sample.
pub fn per_sample_losses(params: &ModelParams, x: &Matrix, y: &[usize]) -> Result<Vec<f64>> {
    check_labels(y, x.rows(), params.num_classes())?;
    let logits = forward(params, x)?;
    Ok(y.iter().enumerate().map(|(i, &l)| cross_entropy_row(logits.row(i), l)).collect())
}

/// Mean of `weight_i * ce_i` over the batch and its exact gradient.
///
/// Weights default to 1 and may be negative. With `Scope::LastLayer` every
/// block except the final layer's is left at zero.
pub fn loss_and_grad(
    params: &ModelParams,
    x: &Matrix,
    y: &[usize],
    weights: Option<&[f64]>,
    scope: Scope,
) -> Result<(LossValue, GradParams)> {
    let n = x.rows();
    let classes = params.num_classes();
    check_labels(y, n, classes)?;
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::Shape(format!("{} weights for {n} samples", w.len())));
        }
    }
    let mut grad = params.zero_grad();
    if n == 0 {
        return Ok((LossValue { total: 0.0, per_sample: Vec::new() }, grad));
    }
    let cache = forward_cached(params, x)?;
    let logits = cache.pre.last().unwrap();
    let inv_n = 1.0 / n as f64;

    let mut per_sample = Vec::with_capacity(n);
    let mut delta = Matrix::zeros(n, classes);
    for i in 0..n {
        let wi = weights.map_or(1.0, |w| w[i]);
        let row = logits.row(i);
        per_sample.push(wi * cross_entropy_row(row, y[i]));
        if wi == 0.0 {
            continue;
        }
        let p = softmax_row(row);
        let d = delta.row_mut(i);
        for c in 0..classes {
            let target = if c == y[i] { 1.0 } else { 0.0 };
            d[c] = wi * inv_n * (p[c] - target);
        }
    }
    let total = per_sample.iter().sum::<f64>() * inv_n;

    let last = params.layers.len() - 1;
    for li in (0..=last).rev() {
        let g = &mut grad.layers[li];
        g.weight = cache.acts[li].t_matmul(&delta)?;
        for r in 0..delta.rows() {
            for (b, d) in g.bias.iter_mut().zip(delta.row(r)) {
                *b += d;
            }
        }
        if li == 0 || scope == Scope::LastLayer {
            break;
        }
        let mut back = delta.matmul_t(&params.layers[li].weight)?;
        if params.activation == Activation::Relu {
            let pre = &cache.pre[li - 1];
            for (v, z) in back.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                if *z <= 0.0 {
                    *v = 0.0;
                }
            }
        }
        delta = back;
    }
    Ok((LossValue { total, per_sample }, grad))
}
