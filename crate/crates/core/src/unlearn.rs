//! Pretraining and the unlearning catalog.
//!
//! Every procedure is deterministic full-batch descent. The unlearning
//! objective weighs each sample by its forget score `w_i`:
//! `w_i * l_f + (1 - w_i) * l_r`, realized here as a per-sample weight on
//! the cross-entropy (see [`MuLossSpec`]).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ForgetMask};
use crate::error::{Error, Result};
use crate::models::{init_params, loss_and_grad, GradParams, ModelParams, Scope};
use crate::numcore::{sign, RngStream};

/// Losses beyond this magnitude abort a run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Retrain,
    #[serde(rename = "FT")]
    Ft,
    #[serde(rename = "GA")]
    Ga,
    #[serde(rename = "RL")]
    Rl,
    L1Sparse,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Retrain, Method::Ft, Method::Ga, Method::Rl, Method::L1Sparse];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Retrain => "Retrain",
            Method::Ft => "FT",
            Method::Ga => "GA",
            Method::Rl => "RL",
            Method::L1Sparse => "L1Sparse",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnlearnConfig {
    pub method: Method,
    /// Weight of the forget term in `l_r(D_r) + lambda_reg * l_f(D_f)`;
    /// only fine-tuning reads it (0 gives plain FT).
    pub lambda_reg: f64,
    pub lr: f64,
    pub epochs: usize,
    /// L1Sparse only.
    pub l1_coef: f64,
    pub scope: Scope,
    pub rng: RngStream,
}

impl Default for UnlearnConfig {
    fn default() -> Self {
        Self {
            method: Method::Ft,
            lambda_reg: 0.0,
            lr: 0.1,
            epochs: 10,
            l1_coef: 1e-4,
            scope: Scope::All,
            rng: RngStream::new(0, 0),
        }
    }
}

impl UnlearnConfig {
    pub fn new(method: Method) -> Self {
        Self { method, ..Self::default() }
    }
}

/// Per-sample weighting of the unlearning loss.
///
/// With `l_f = forget_sign * l` and `l_r = l`, sample `i` contributes
/// `(lambda * forget_sign * w_i + (1 - w_i)) * l`. The default
/// (`lambda = 1`, `forget_sign = -1`) gives `1 - 2 w_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuLossSpec {
    pub lambda: f64,
    pub forget_sign: f64,
}

impl Default for MuLossSpec {
    fn default() -> Self {
        Self { lambda: 1.0, forget_sign: -1.0 }
    }
}

impl MuLossSpec {
    pub fn sample_weight(&self, w: f64) -> f64 {
        self.lambda * self.forget_sign * w + (1.0 - w)
    }

    pub fn sample_weights(&self, w: &[f64]) -> Vec<f64> {
        w.iter().map(|&v| self.sample_weight(v)).collect()
    }
}

fn check_loss(epoch: usize, loss: f64) -> Result<()> {
    if !loss.is_finite() || loss.abs() > DIVERGENCE_LIMIT {
        return Err(Error::Divergence { epoch, loss });
    }
    Ok(())
}

/// Runs `epochs` steps of `params -= lr * grad`, where `objective` returns
/// the loss and gradient at the current parameters.
fn descend<F>(mut params: ModelParams, epochs: usize, lr: f64, mut objective: F) -> Result<ModelParams>
where
    F: FnMut(&ModelParams) -> Result<(f64, GradParams)>,
{
    for epoch in 0..epochs {
        let (loss, grad) = objective(&params)?;
        check_loss(epoch, loss)?;
        params.descend(lr, &grad);
        if !params.is_finite() {
            return Err(Error::Divergence { epoch, loss: f64::NAN });
        }
    }
    Ok(params)
}

fn plain_objective<'a>(
    ds: &'a Dataset,
    weights: Option<&'a [f64]>,
    scope: Scope,
) -> impl FnMut(&ModelParams) -> Result<(f64, GradParams)> + 'a {
    move |p| {
        let (loss, grad) = loss_and_grad(p, &ds.x, &ds.y, weights, scope)?;
        Ok((loss.total, grad))
    }
}

/// Trains a fresh model on `dataset` by full-batch gradient descent.
pub fn train(dataset: &Dataset, sizes: &[usize], epochs: usize, lr: f64, rng: RngStream) -> Result<ModelParams> {
    let init = init_params(sizes, rng)?;
    check_shapes(&init, dataset)?;
    descend(init, epochs, lr, plain_objective(dataset, None, Scope::All))
}

fn check_shapes(params: &ModelParams, ds: &Dataset) -> Result<()> {
    if params.input_dim() != ds.dim() {
        return Err(Error::Shape(format!("model expects {} features, data has {}", params.input_dim(), ds.dim())));
    }
    if params.num_classes() < ds.classes {
        return Err(Error::Shape(format!("model has {} outputs for {} classes", params.num_classes(), ds.classes)));
    }
    Ok(())
}

fn retain_set(dataset: &Dataset, mask: &ForgetMask) -> Result<Dataset> {
    let keep = mask.complement(dataset.len());
    if keep.is_empty() {
        return Err(Error::EmptyRetainSet);
    }
    Ok(dataset.subset(&keep))
}

/// Exact unlearning: train from a fresh seeded init on the retain set.
///
/// With `Scope::LastLayer` the earlier layers are kept from `theta_o` and
/// only a freshly initialized last layer is trained.
pub fn retrain(theta_o: &ModelParams, dataset: &Dataset, mask: &ForgetMask, config: &UnlearnConfig) -> Result<ModelParams> {
    let retain = retain_set(dataset, mask)?;
    match config.scope {
        Scope::All => train(&retain, &theta_o.sizes(), config.epochs, config.lr, config.rng),
        Scope::LastLayer => {
            let last = theta_o.layers.last().unwrap();
            let fresh = init_params(&[last.fan_in(), last.fan_out()], config.rng)?;
            let mut params = theta_o.clone();
            *params.layers.last_mut().unwrap() = fresh.layers.into_iter().next().unwrap();
            check_shapes(&params, dataset)?;
            descend(params, config.epochs, config.lr, plain_objective(&retain, None, Scope::LastLayer))
        }
    }
}

/// Fine-tunes `theta_o` on the retain set, minus `lambda_reg` times the mean
/// forget-set loss when `lambda_reg > 0`.
pub fn finetune(theta_o: &ModelParams, dataset: &Dataset, mask: &ForgetMask, config: &UnlearnConfig) -> Result<ModelParams> {
    check_shapes(theta_o, dataset)?;
    let retain = retain_set(dataset, mask)?;
    if config.lambda_reg == 0.0 || mask.is_empty() {
        return descend(theta_o.clone(), config.epochs, config.lr, plain_objective(&retain, None, config.scope));
    }
    let forget = dataset.subset(mask.indices());
    let lambda = config.lambda_reg;
    descend(theta_o.clone(), config.epochs, config.lr, |p| {
        let (lr_loss, mut grad) = loss_and_grad(p, &retain.x, &retain.y, None, config.scope)?;
        let (lf_loss, lf_grad) = loss_and_grad(p, &forget.x, &forget.y, None, config.scope)?;
        grad.add_scaled(-lambda, &lf_grad);
        Ok((lr_loss.total - lambda * lf_loss.total, grad))
    })
}

/// Descends `mean_i (1 - 2 w_i) * l(theta; z_i)` from `theta_o`.
pub fn gradient_ascent_mu(theta_o: &ModelParams, dataset: &Dataset, w: &[f64], config: &UnlearnConfig) -> Result<ModelParams> {
    check_shapes(theta_o, dataset)?;
    if w.len() != dataset.len() {
        return Err(Error::Shape(format!("{} forget scores for {} samples", w.len(), dataset.len())));
    }
    if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::BadSpec("forget scores must lie in [0, 1]".into()));
    }
    let weights = MuLossSpec::default().sample_weights(w);
    descend(theta_o.clone(), config.epochs, config.lr, plain_objective(dataset, Some(&weights), config.scope))
}

/// Relabels each forget sample uniformly among the other `C - 1` classes.
pub fn relabel_forget(dataset: &Dataset, mask: &ForgetMask, rng: RngStream) -> Result<Dataset> {
    if dataset.classes < 2 {
        return Err(Error::SingleClass);
    }
    let mut r = rng.rng();
    let mut out = dataset.clone();
    for &i in mask.indices() {
        let draw = r.random_range(0..dataset.classes - 1);
        let y = dataset.y[i];
        out.y[i] = if draw >= y { draw + 1 } else { draw };
    }
    Ok(out)
}

/// Random labeling: relabel the forget set once, then fine-tune on the
/// whole (partly relabeled) training set.
pub fn random_label(theta_o: &ModelParams, dataset: &Dataset, mask: &ForgetMask, config: &UnlearnConfig) -> Result<ModelParams> {
    check_shapes(theta_o, dataset)?;
    let relabeled = relabel_forget(dataset, mask, config.rng)?;
    descend(theta_o.clone(), config.epochs, config.lr, plain_objective(&relabeled, None, config.scope))
}

/// Fine-tuning on the retain set with an added `l1_coef * ||theta||_1`.
pub fn l1_sparse(theta_o: &ModelParams, dataset: &Dataset, mask: &ForgetMask, config: &UnlearnConfig) -> Result<ModelParams> {
    check_shapes(theta_o, dataset)?;
    if !(config.l1_coef >= 0.0) {
        return Err(Error::BadSpec(format!("l1_coef must be >= 0, got {}", config.l1_coef)));
    }
    let retain = retain_set(dataset, mask)?;
    let coef = config.l1_coef;
    let last = theta_o.layers.len() - 1;
    descend(theta_o.clone(), config.epochs, config.lr, |p| {
        let (loss, mut grad) = loss_and_grad(p, &retain.x, &retain.y, None, config.scope)?;
        if coef == 0.0 {
            return Ok((loss.total, grad));
        }
        let mut penalty = 0.0;
        for (li, (g, layer)) in grad.layers.iter_mut().zip(&p.layers).enumerate() {
            if config.scope == Scope::LastLayer && li != last {
                continue;
            }
            for (gv, pv) in g.weight.as_mut_slice().iter_mut().zip(layer.weight.as_slice()) {
                *gv += coef * sign(*pv);
                penalty += pv.abs();
            }
            for (gv, pv) in g.bias.iter_mut().zip(&layer.bias) {
                *gv += coef * sign(*pv);
                penalty += pv.abs();
            }
        }
        Ok((loss.total + coef * penalty, grad))
    })
}

/// Dispatches on `config.method`. GA uses the mask's 0/1 indicator as the
/// forget scores.
pub fn unlearn(theta_o: &ModelParams, dataset: &Dataset, mask: &ForgetMask, config: &UnlearnConfig) -> Result<ModelParams> {
    match config.method {
        Method::Retrain => retrain(theta_o, dataset, mask, config),
        Method::Ft => finetune(theta_o, dataset, mask, config),
        Method::Ga => gradient_ascent_mu(theta_o, dataset, &mask.indicator(dataset.len()), config),
        Method::Rl => random_label(theta_o, dataset, mask, config),
        Method::L1Sparse => l1_sparse(theta_o, dataset, mask, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_blobs;
    use crate::metrics::accuracy;
    use crate::models::per_sample_losses;

    fn blobs() -> Dataset {
        gen_blobs(30, 3, 2, 0.5, RngStream::new(2, 0)).unwrap()
    }

    fn pretrained(ds: &Dataset) -> ModelParams {
        train(ds, &[2, 8, 3], 150, 0.5, RngStream::new(1, 0)).unwrap()
    }

    #[test]
    fn zero_epoch_training_is_init() {
        let ds = blobs();
        let p = train(&ds, &[2, 3], 0, 0.5, RngStream::new(4, 0)).unwrap();
        assert_eq!(p, init_params(&[2, 3], RngStream::new(4, 0)).unwrap());
    }

    #[test]
    fn training_separable_blobs_fits() {
        let ds = gen_blobs(50, 2, 2, 0.3, RngStream::new(6, 0)).unwrap();
        let p = train(&ds, &[2, 2], 200, 0.5, RngStream::new(0, 0)).unwrap();
        assert!(accuracy(&p, &ds.x, &ds.y).unwrap() > 95.0);
        assert_eq!(p, train(&ds, &[2, 2], 200, 0.5, RngStream::new(0, 0)).unwrap());
    }

    #[test]
    fn training_reports_divergence() {
        let ds = blobs();
        let err = train(&ds, &[2, 16, 3], 50, 1e9, RngStream::new(0, 0)).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err:?}");
    }

    #[test]
    fn retrain_with_empty_mask_is_training() {
        let ds = blobs();
        let theta_o = pretrained(&ds);
        let cfg = UnlearnConfig { method: Method::Retrain, epochs: 40, lr: 0.3, rng: RngStream::new(9, 1), ..Default::default() };
        let a = retrain(&theta_o, &ds, &ForgetMask::empty(), &cfg).unwrap();
        let b = train(&ds, &theta_o.sizes(), 40, 0.3, RngStream::new(9, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn retrain_forgets_a_removed_class() {
        let ds = gen_blobs(30, 3, 2, 0.4, RngStream::new(3, 0)).unwrap();
        let theta_o = pretrained(&ds);
        let forget = ds.class_indices(2);
        let mask = ForgetMask::new(forget.clone(), ds.len()).unwrap();
        let cfg = UnlearnConfig { method: Method::Retrain, epochs: 150, lr: 0.5, ..Default::default() };
        let theta_u = retrain(&theta_o, &ds, &mask, &cfg).unwrap();
        let f = ds.subset(&forget);
        let acc = accuracy(&theta_u, &f.x, &f.y).unwrap();
        assert!(acc < 100.0 / 3.0 + 10.0, "forget accuracy {acc}");
    }

    #[test]
    fn retrain_rejects_full_mask() {
        let ds = blobs();
        let theta_o = pretrained(&ds);
        let mask = ForgetMask::new((0..ds.len()).collect(), ds.len()).unwrap();
        assert!(matches!(retrain(&theta_o, &ds, &mask, &UnlearnConfig::new(Method::Retrain)), Err(Error::EmptyRetainSet)));
    }

    #[test]
    fn last_layer_scope_freezes_earlier_layers() {
        let ds = blobs();
        let theta_o = pretrained(&ds);
        let mask = ForgetMask::new(vec![0, 5, 9], ds.len()).unwrap();
        for method in Method::ALL {
            let cfg = UnlearnConfig { method, scope: Scope::LastLayer, epochs: 5, ..Default::default() };
            let mask = if method == Method::Retrain { ForgetMask::empty() } else { mask.clone() };
            let theta_u = unlearn(&theta_o, &ds, &mask, &cfg).unwrap();
            assert_eq!(theta_u.layers[0], theta_o.layers[0], "{method}");
            assert_ne!(theta_u.layers[1], theta_o.layers[1], "{method}");
        }
    }

    #[test]
    fn zero_work_leaves_model_unchanged() {
        let ds = blobs();
        let theta_o = pretrained(&ds);
        let mask = ForgetMask::new(vec![1, 2, 3], ds.len()).unwrap();
        for method in [Method::Ft, Method::Ga, Method::Rl, Method::L1Sparse] {
            let cfg = UnlearnConfig { method, epochs: 0, ..Default::default() };
            assert_eq!(unlearn(&theta_o, &ds, &mask, &cfg).unwrap(), theta_o, "{method}");
        }
        let cfg = UnlearnConfig { lr: 0.0, ..UnlearnConfig::new(Method::Ft) };
        assert_eq!(finetune(&theta_o, &ds, &mask, &cfg).unwrap(), theta_o);
    }

    #[test]
    fn finetune_keeps_retain_accuracy() {
        let ds = blobs();
        let theta_o = train(&ds, &[2, 8, 3], 30, 0.5, RngStream::new(1, 0)).unwrap();
        let mask = ForgetMask::new((0..9).collect(), ds.len()).unwrap();
        let retain = ds.subset(&mask.complement(ds.len()));
        let before = accuracy(&theta_o, &retain.x, &retain.y).unwrap();
        let cfg = UnlearnConfig { epochs: 10, lr: 0.1, ..UnlearnConfig::new(Method::Ft) };
        let theta_u = finetune(&theta_o, &ds, &mask, &cfg).unwrap();
        assert!(accuracy(&theta_u, &retain.x, &retain.y).unwrap() >= before);
    }

    #[test]
    fn ga_special_cases() {
        let ds = blobs();
        let theta_o = pretrained(&ds);
        let cfg = UnlearnConfig { epochs: 7, lr: 0.2, ..UnlearnConfig::new(Method::Ga) };
        let zero = gradient_ascent_mu(&theta_o, &ds, &vec![0.0; ds.len()], &cfg).unwrap();
        let ft = finetune(&theta_o, &ds, &ForgetMask::empty(), &UnlearnConfig { method: Method::Ft, ..cfg.clone() }).unwrap();
        assert_eq!(zero, ft);
        let half = gradient_ascent_mu(&theta_o, &ds, &vec![0.5; ds.len()], &cfg).unwrap();
        assert_eq!(half, theta_o);
        assert!(gradient_ascent_mu(&theta_o, &ds, &vec![1.5; ds.len()], &cfg).is_err());
    }

    #[test]
    fn ga_raises_forget_loss() {
        let mut ds = gen_blobs(30, 2, 2, 0.5, RngStream::new(5, 0)).unwrap();
        // planted outliers: points moved next to the other class
        let planted = [0usize, 2, 4];
        for &i in &planted {
            let v = if ds.y[i] == 0 { 1.0 } else { -1.0 };
            ds.x.set(i, 0, v);
        }
        let theta_o = train(&ds, &[2, 2], 100, 0.5, RngStream::new(0, 0)).unwrap();
        let mut w = vec![0.0; ds.len()];
        planted.iter().for_each(|&i| w[i] = 1.0);
        let forget = ds.subset(&planted);
        let mut prev = per_sample_losses(&theta_o, &forget.x, &forget.y).unwrap().iter().sum::<f64>();
        for epochs in 1..=3 {
            let cfg = UnlearnConfig { epochs, lr: 0.2, ..UnlearnConfig::new(Method::Ga) };
            let theta = gradient_ascent_mu(&theta_o, &ds, &w, &cfg).unwrap();
            let cur = per_sample_losses(&theta, &forget.x, &forget.y).unwrap().iter().sum::<f64>();
            assert!(cur > prev, "epoch {epochs}: {cur} <= {prev}");
            prev = cur;
        }
    }

    #[test]
    fn mu_weights_follow_forget_scores() {
        let spec = MuLossSpec::default();
        assert_eq!(spec.sample_weights(&[0.0, 1.0, 0.5, 0.25]), vec![1.0, -1.0, 0.0, 0.5]);
    }

    #[test]
    fn ga_binary_scores_match_direct_objective() {
        // independent evaluation of w_i * (-l_i) + (1 - w_i) * l_i
        let ds = blobs();
        let theta = pretrained(&ds);
        let mask = ForgetMask::new(vec![0, 3, 11, 20], ds.len()).unwrap();
        let w = mask.indicator(ds.len());
        let weights = MuLossSpec::default().sample_weights(&w);
        let (lv, _) = loss_and_grad(&theta, &ds.x, &ds.y, Some(&weights), Scope::All).unwrap();
        let raw = per_sample_losses(&theta, &ds.x, &ds.y).unwrap();
        let direct: f64 = raw
            .iter()
            .enumerate()
            .map(|(i, l)| if mask.contains(i) { -l } else { *l })
            .sum::<f64>()
            / ds.len() as f64;
        assert!((lv.total - direct).abs() < 1e-12);
        for (i, wt) in weights.iter().enumerate() {
            assert_eq!(*wt, if mask.contains(i) { -1.0 } else { 1.0 });
        }
    }

    #[test]
    fn random_label_examples() {
        let ds = gen_blobs(20, 2, 2, 0.5, RngStream::new(5, 0)).unwrap();
        let mask = ForgetMask::new(vec![0, 1, 2, 3], ds.len()).unwrap();
        let relabeled = relabel_forget(&ds, &mask, RngStream::new(1, 0)).unwrap();
        for i in 0..ds.len() {
            let expect = if mask.contains(i) { 1 - ds.y[i] } else { ds.y[i] };
            assert_eq!(relabeled.y[i], expect);
        }
        let many = gen_blobs(20, 4, 2, 0.5, RngStream::new(5, 0)).unwrap();
        let mask = ForgetMask::new((0..40).collect(), many.len()).unwrap();
        let r = relabel_forget(&many, &mask, RngStream::new(1, 0)).unwrap();
        assert!((0..40).all(|i| r.y[i] != many.y[i] && r.y[i] < 4));

        let single = Dataset { classes: 1, y: vec![0; ds.len()], ..ds.clone() };
        assert!(matches!(relabel_forget(&single, &mask_small(), RngStream::new(0, 0)), Err(Error::SingleClass)));
    }

    fn mask_small() -> ForgetMask {
        ForgetMask::new(vec![0], 1).unwrap()
    }

    #[test]
    fn random_label_forgets_more_than_it_retains() {
        let ds = blobs();
        let theta_o = pretrained(&ds);
        let mask = ForgetMask::new((0..ds.len()).step_by(10).collect(), ds.len()).unwrap();
        let cfg = UnlearnConfig { epochs: 60, lr: 0.5, ..UnlearnConfig::new(Method::Rl) };
        let theta_u = random_label(&theta_o, &ds, &mask, &cfg).unwrap();
        let (f, r) = ds.partition(&mask);
        assert!(accuracy(&theta_u, &f.x, &f.y).unwrap() < accuracy(&theta_u, &r.x, &r.y).unwrap());
    }

    #[test]
    fn l1_sparse_shrinks_parameters() {
        let ds = blobs();
        let theta_o = pretrained(&ds);
        let mask = ForgetMask::new(vec![4, 8, 15], ds.len()).unwrap();
        let base = UnlearnConfig { epochs: 20, lr: 0.1, ..UnlearnConfig::new(Method::L1Sparse) };
        let no_pen = l1_sparse(&theta_o, &ds, &mask, &UnlearnConfig { l1_coef: 0.0, ..base.clone() }).unwrap();
        let ft = finetune(&theta_o, &ds, &mask, &UnlearnConfig { method: Method::Ft, ..base.clone() }).unwrap();
        assert_eq!(no_pen, ft);
        let heavy = l1_sparse(&theta_o, &ds, &mask, &UnlearnConfig { l1_coef: 0.5, ..base.clone() }).unwrap();
        assert!(heavy.l1_norm() < ft.l1_norm());
        assert!(l1_sparse(&theta_o, &ds, &mask, &UnlearnConfig { l1_coef: -1.0, ..base }).is_err());
    }

    #[test]
    fn finetune_with_forget_term_moves_away_from_forget_set() {
        let ds = blobs();
        let theta_o = pretrained(&ds);
        let mask = ForgetMask::new(vec![0, 1, 2], ds.len()).unwrap();
        let plain = UnlearnConfig { epochs: 10, lr: 0.2, ..UnlearnConfig::new(Method::Ft) };
        let reg = UnlearnConfig { lambda_reg: 1.0, ..plain.clone() };
        let a = finetune(&theta_o, &ds, &mask, &plain).unwrap();
        let b = finetune(&theta_o, &ds, &mask, &reg).unwrap();
        let f = ds.subset(mask.indices());
        let la: f64 = per_sample_losses(&a, &f.x, &f.y).unwrap().iter().sum();
        let lb: f64 = per_sample_losses(&b, &f.x, &f.y).unwrap().iter().sum();
        assert!(lb > la);
    }

    #[test]
    fn methods_are_deterministic() {
        let ds = blobs();
        let theta_o = pretrained(&ds);
        let mask = ForgetMask::new(vec![3, 7, 30, 44], ds.len()).unwrap();
        for method in Method::ALL {
            let cfg = UnlearnConfig { method, epochs: 8, rng: RngStream::new(3, 3), ..Default::default() };
            let a = unlearn(&theta_o, &ds, &mask, &cfg).unwrap();
            let b = unlearn(&theta_o, &ds, &mask, &cfg).unwrap();
            assert_eq!(a, b, "{method}");
        }
    }
}
