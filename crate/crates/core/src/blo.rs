//! Bi-level forget set selection.
//!
//! The upper level chooses relaxed selection weights `w` in the capped
//! simplex; the lower level produces the unlearned model `θ_u(w)` by `K`
//! full-batch sign-descent steps on the unlearning loss
//! `mean_i (1 - 2 w_i) * l(θ; z_i)`.
//!
//! Each lower-level step moves every parameter by exactly `±β` or `0`, and
//! the sign pattern is locally constant in `w`, so `θ_u` does not vary with
//! `w` almost everywhere. The full derivative of the upper objective
//! therefore equals its partial derivative in `w` with `θ_u` held fixed,
//! and the upper level runs plain projected gradient descent:
//!
//! ```text
//! θ_u  <- sign-descent(w, θ_init, β, K)
//! w    <- project(w - α ∇_w f(w, θ_u), m)
//! f(w, θ) = s * Σ_i w_i L_i(θ) + γ ||w||²      (s = +1 worst, -1 easiest)
//! ```
//!
//! where `L_i` is a per-sample loss, or a per-class mean loss when selecting
//! classes.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{mask_from_weights, Dataset, ForgetMask};
use crate::error::{Error, Result};
use crate::models::{init_params, loss_and_grad, per_sample_losses, ModelParams, Scope};
use crate::numcore::RngStream;
use crate::projection::{project_capped_simplex, SelectionWeights};
use crate::unlearn::{MuLossSpec, DIVERGENCE_LIMIT};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Sample,
    Class,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Worst,
    Easiest,
}

impl Direction {
    fn loss_sign(self) -> f64 {
        match self {
            Direction::Worst => 1.0,
            Direction::Easiest => -1.0,
        }
    }
}

/// Starting point of every lower-level unroll.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerInit {
    /// The pretrained model.
    #[default]
    Pretrained,
    /// A seeded random initialization, the same one for every outer step.
    Random,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    /// `m / N` everywhere.
    #[default]
    Uniform,
    /// A random 0/1 vector with `m` ones.
    RandomBinary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BloConfig {
    /// Weight of `||w||²` in the upper objective.
    pub gamma: f64,
    /// Upper-level step size.
    pub alpha: f64,
    /// Lower-level sign step size.
    pub beta: f64,
    /// Lower-level unroll length.
    pub inner_epochs: usize,
    /// Upper-level iterations.
    pub outer_iters: usize,
    pub granularity: Granularity,
    pub direction: Direction,
    pub lower_init: LowerInit,
    pub weight_init: WeightInit,
    pub rng: RngStream,
}

impl Default for BloConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-4,
            alpha: 1e-3,
            beta: 0.01,
            inner_epochs: 10,
            outer_iters: 20,
            granularity: Granularity::Sample,
            direction: Direction::Worst,
            lower_init: LowerInit::Pretrained,
            weight_init: WeightInit::Uniform,
            rng: RngStream::new(0, 0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub weights: SelectionWeights,
    /// Top-`m` units by final weight: sample indices, or class indices for
    /// class granularity.
    pub mask: ForgetMask,
    /// Upper objective at `w_0, ..., w_T`.
    pub trajectory: Vec<f64>,
}

impl SelectionResult {
    /// Forget mask over training samples.
    pub fn sample_mask(&self, dataset: &Dataset, granularity: Granularity) -> Result<ForgetMask> {
        match granularity {
            Granularity::Sample => Ok(self.mask.clone()),
            Granularity::Class => {
                let idx = (0..dataset.len()).filter(|&i| self.mask.contains(dataset.y[i])).collect();
                ForgetMask::new(idx, dataset.len())
            }
        }
    }
}

fn unit_count(dataset: &Dataset, granularity: Granularity) -> usize {
    match granularity {
        Granularity::Sample => dataset.len(),
        Granularity::Class => dataset.classes,
    }
}

/// Per-sample forget scores implied by unit weights.
pub fn sample_scores(w: &[f64], dataset: &Dataset, granularity: Granularity) -> Result<Vec<f64>> {
    let units = unit_count(dataset, granularity);
    if w.len() != units {
        return Err(Error::Shape(format!("{} weights for {units} selection units", w.len())));
    }
    Ok(match granularity {
        Granularity::Sample => w.to_vec(),
        Granularity::Class => dataset.y.iter().map(|&c| w[c]).collect(),
    })
}

/// `K` full-batch sign-descent steps on the unlearning loss with per-sample
/// forget scores `w`.
pub fn lower_signsgd(w: &[f64], theta_init: &ModelParams, dataset: &Dataset, beta: f64, k: usize) -> Result<ModelParams> {
    lower_signsgd_scaled(w, theta_init, dataset, beta, k, 1.0)
}

/// [`lower_signsgd`] on the unlearning loss multiplied by `loss_scale`.
pub fn lower_signsgd_scaled(
    w: &[f64],
    theta_init: &ModelParams,
    dataset: &Dataset,
    beta: f64,
    k: usize,
    loss_scale: f64,
) -> Result<ModelParams> {
    if w.len() != dataset.len() {
        return Err(Error::Shape(format!("{} forget scores for {} samples", w.len(), dataset.len())));
    }
    if !(beta > 0.0) {
        return Err(Error::BadSpec(format!("beta must be > 0, got {beta}")));
    }
    let weights: Vec<f64> = MuLossSpec::default().sample_weights(w).into_iter().map(|v| loss_scale * v).collect();
    let mut theta = theta_init.clone();
    for epoch in 0..k {
        let (loss, grad) = loss_and_grad(&theta, &dataset.x, &dataset.y, Some(&weights), Scope::All)?;
        if !loss.total.is_finite() || loss.total.abs() > DIVERGENCE_LIMIT * loss_scale.abs().max(1.0) {
            return Err(Error::Divergence { epoch, loss: loss.total });
        }
        theta.sign_descend(beta, &grad);
    }
    Ok(theta)
}

/// Per-unit losses: sample cross-entropies, or class mean cross-entropies.
pub fn unit_losses(theta_u: &ModelParams, dataset: &Dataset, granularity: Granularity) -> Result<Vec<f64>> {
    let losses = per_sample_losses(theta_u, &dataset.x, &dataset.y)?;
    Ok(match granularity {
        Granularity::Sample => losses,
        Granularity::Class => {
            let mut sums = vec![0.0; dataset.classes];
            let mut counts = vec![0usize; dataset.classes];
            for (l, &c) in losses.iter().zip(&dataset.y) {
                sums[c] += l;
                counts[c] += 1;
            }
            sums.into_iter().zip(counts).map(|(s, n)| if n == 0 { 0.0 } else { s / n as f64 }).collect()
        }
    })
}

/// Upper objective `s * Σ w_u L_u + γ ||w||²`.
pub fn upper_objective(
    w: &[f64],
    theta_u: &ModelParams,
    dataset: &Dataset,
    gamma: f64,
    granularity: Granularity,
    direction: Direction,
) -> Result<f64> {
    let losses = unit_losses(theta_u, dataset, granularity)?;
    if losses.len() != w.len() {
        return Err(Error::Shape(format!("{} weights for {} selection units", w.len(), losses.len())));
    }
    let s = direction.loss_sign();
    Ok(w.iter().zip(&losses).map(|(wi, li)| s * wi * li + gamma * wi * wi).sum())
}

/// Gradient of [`upper_objective`] in `w` with `θ_u` held fixed:
/// `s * L_u + 2 γ w_u`.
pub fn upper_gradient(
    w: &[f64],
    theta_u: &ModelParams,
    dataset: &Dataset,
    gamma: f64,
    granularity: Granularity,
    direction: Direction,
) -> Result<Vec<f64>> {
    let losses = unit_losses(theta_u, dataset, granularity)?;
    if losses.len() != w.len() {
        return Err(Error::Shape(format!("{} weights for {} selection units", w.len(), losses.len())));
    }
    let s = direction.loss_sign();
    Ok(w.iter().zip(&losses).map(|(wi, li)| s * li + 2.0 * gamma * wi).collect())
}

fn initial_weights(units: usize, m: usize, config: &BloConfig) -> Result<SelectionWeights> {
    match config.weight_init {
        WeightInit::Uniform => SelectionWeights::uniform(units, m),
        WeightInit::RandomBinary => {
            if m > units {
                return Err(Error::Budget { m, n: units });
            }
            let mut order: Vec<usize> = (0..units).collect();
            order.shuffle(&mut config.rng.fork(2).rng());
            let mut w = vec![0.0; units];
            order[..m].iter().for_each(|&i| w[i] = 1.0);
            Ok(SelectionWeights { w, budget: m })
        }
    }
}

/// Alternating projected gradient (upper) and sign-descent unrolling
/// (lower). Returns the final weights, their top-`m` mask and the objective
/// trajectory.
pub fn select(dataset: &Dataset, m: usize, theta_o: &ModelParams, config: &BloConfig) -> Result<SelectionResult> {
    let units = unit_count(dataset, config.granularity);
    if m > units {
        return Err(Error::Budget { m, n: units });
    }
    let theta_init = match config.lower_init {
        LowerInit::Pretrained => theta_o.clone(),
        LowerInit::Random => init_params(&theta_o.sizes(), config.rng.fork(1))?,
    };
    let solve = |w: &SelectionWeights| -> Result<ModelParams> {
        let scores = sample_scores(&w.w, dataset, config.granularity)?;
        lower_signsgd(&scores, &theta_init, dataset, config.beta, config.inner_epochs)
    };

    let mut weights = initial_weights(units, m, config)?;
    let mut trajectory = Vec::with_capacity(config.outer_iters + 1);
    for _ in 0..config.outer_iters {
        let theta_u = solve(&weights)?;
        trajectory.push(upper_objective(&weights.w, &theta_u, dataset, config.gamma, config.granularity, config.direction)?);
        let grad = upper_gradient(&weights.w, &theta_u, dataset, config.gamma, config.granularity, config.direction)?;
        let stepped: Vec<f64> = weights.w.iter().zip(&grad).map(|(w, g)| w - config.alpha * g).collect();
        weights = project_capped_simplex(&stepped, m)?;
    }
    let theta_u = solve(&weights)?;
    trajectory.push(upper_objective(&weights.w, &theta_u, dataset, config.gamma, config.granularity, config.direction)?);

    let mask = mask_from_weights(&weights.w, m)?;
    Ok(SelectionResult { weights, mask, trajectory })
}

/// Empirical witness that the implicit gradient vanishes: perturbs forget
/// score `coord` by `epsilon`, reruns the unroll from the same start, and
/// reports whether the unlearned model is bit-identical.
pub fn ig_probe(
    w: &[f64],
    theta_init: &ModelParams,
    dataset: &Dataset,
    beta: f64,
    k: usize,
    epsilon: f64,
    coord: usize,
) -> Result<bool> {
    if coord >= w.len() {
        return Err(Error::Shape(format!("coordinate {coord} out of range for {} scores", w.len())));
    }
    let base = lower_signsgd(w, theta_init, dataset, beta, k)?;
    let mut bumped = w.to_vec();
    bumped[coord] += epsilon;
    let moved = lower_signsgd(&bumped, theta_init, dataset, beta, k)?;
    let identical = base.values().zip(moved.values()).all(|(a, b)| a.to_bits() == b.to_bits());
    Ok(identical)
}
