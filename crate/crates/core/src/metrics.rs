//! Unlearning evaluation: UA, MIA, RA, TA, average gap and class entropy.
//!
//! All metrics are percentages in `[0, 100]` kept at full precision; output
//! files round them to two decimals.
//!
//! The membership attack is a single loss threshold. The threshold `τ` is
//! calibrated on retain samples (members, predicted when `loss < τ`) against
//! test samples (non-members) to maximize balanced accuracy, with ties going
//! to the smaller `τ`. MIA is the share of forget samples the calibrated
//! attack calls non-members.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ForgetMask};
use crate::error::{Error, Result};
use crate::models::{forward, per_sample_losses, softmax_row, ModelParams};
use crate::numcore::Matrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ua: f64,
    pub mia: f64,
    pub ra: f64,
    pub ta: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub ua: f64,
    pub mia: f64,
    pub ra: f64,
    pub ta: f64,
    pub avg_gap: f64,
}

impl EvalReport {
    pub fn as_array(&self) -> [f64; 4] {
        [self.ua, self.mia, self.ra, self.ta]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self { ua: v[0], mia: v[1], ra: v[2], ta: v[3] }
    }
}

/// Header of the evaluation CSV.
pub const REPORT_CSV_HEADER: &str = "method,set_kind,ua,mia,ra,ta,avg_gap";

/// One CSV row, metrics rounded to two decimals.
pub fn report_csv_row(method: &str, set_kind: &str, report: &EvalReport, gap: &GapReport) -> String {
    format!(
        "{method},{set_kind},{:.2},{:.2},{:.2},{:.2},{:.2}",
        round2(report.ua),
        round2(report.mia),
        round2(report.ra),
        round2(report.ta),
        round2(gap.avg_gap)
    )
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn predict(theta: &ModelParams, x: &Matrix) -> Result<Vec<usize>> {
    let logits = forward(theta, x)?;
    Ok((0..logits.rows()).map(|i| argmax(logits.row(i))).collect())
}

/// Percentage of correct argmax predictions.
pub fn accuracy(theta: &ModelParams, x: &Matrix, y: &[usize]) -> Result<f64> {
    if x.rows() == 0 {
        return Err(Error::EmptyBatch("accuracy"));
    }
    if y.len() != x.rows() {
        return Err(Error::Shape(format!("{} labels for {} rows", y.len(), x.rows())));
    }
    let pred = predict(theta, x)?;
    let correct = pred.iter().zip(y).filter(|(p, t)| p == t).count();
    Ok(100.0 * correct as f64 / y.len() as f64)
}

/// Unlearning accuracy: `100 - accuracy` on the forget set.
pub fn compute_ua(theta_u: &ModelParams, forget_x: &Matrix, forget_y: &[usize]) -> Result<f64> {
    if forget_x.rows() == 0 {
        return Err(Error::EmptyBatch("forget set"));
    }
    Ok(100.0 - accuracy(theta_u, forget_x, forget_y)?)
}

/// Calibrated loss threshold: the `τ` among the calibration losses that
/// maximizes `(P[member loss < τ] + P[non-member loss >= τ]) / 2`.
pub fn calibrate_threshold(member: &[f64], nonmember: &[f64]) -> Result<f64> {
    if member.is_empty() {
        return Err(Error::EmptyBatch("MIA members"));
    }
    if nonmember.is_empty() {
        return Err(Error::EmptyBatch("MIA non-members"));
    }
    let mut all: Vec<(f64, bool)> = member
        .iter()
        .map(|&l| (l, true))
        .chain(nonmember.iter().map(|&l| (l, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (nm, nn) = (member.len() as f64, nonmember.len() as f64);

    let mut best = (f64::NEG_INFINITY, all[0].0);
    let (mut members_below, mut nonmembers_below) = (0usize, 0usize);
    let mut i = 0;
    while i < all.len() {
        let tau = all[i].0;
        // members strictly below tau count as predicted members
        let score = 0.5 * (members_below as f64 / nm + (nn - nonmembers_below as f64) / nn);
        if score > best.0 {
            best = (score, tau);
        }
        while i < all.len() && all[i].0 == tau {
            if all[i].1 {
                members_below += 1;
            } else {
                nonmembers_below += 1;
            }
            i += 1;
        }
    }
    Ok(best.1)
}

/// MIA from raw losses.
pub fn mia_from_losses(forget: &[f64], member: &[f64], nonmember: &[f64]) -> Result<f64> {
    if forget.is_empty() {
        return Err(Error::EmptyBatch("forget set"));
    }
    let tau = calibrate_threshold(member, nonmember)?;
    let flagged = forget.iter().filter(|&&l| l >= tau).count();
    Ok(100.0 * flagged as f64 / forget.len() as f64)
}

pub fn compute_mia(theta_u: &ModelParams, forget: &Dataset, retain: &Dataset, test: &Dataset) -> Result<f64> {
    if forget.is_empty() {
        return Err(Error::EmptyBatch("forget set"));
    }
    if retain.is_empty() {
        return Err(Error::EmptyBatch("retain set"));
    }
    if test.is_empty() {
        return Err(Error::EmptyBatch("test set"));
    }
    let lf = per_sample_losses(theta_u, &forget.x, &forget.y)?;
    let lr = per_sample_losses(theta_u, &retain.x, &retain.y)?;
    let lt = per_sample_losses(theta_u, &test.x, &test.y)?;
    mia_from_losses(&lf, &lr, &lt)
}

/// UA, MIA, RA and TA of an unlearned model.
pub fn evaluate(theta_u: &ModelParams, train: &Dataset, mask: &ForgetMask, test: &Dataset) -> Result<EvalReport> {
    let (forget, retain) = train.partition(mask);
    Ok(EvalReport {
        ua: compute_ua(theta_u, &forget.x, &forget.y)?,
        mia: compute_mia(theta_u, &forget, &retain, test)?,
        ra: accuracy(theta_u, &retain.x, &retain.y)?,
        ta: accuracy(theta_u, &test.x, &test.y)?,
    })
}

/// Per-metric absolute differences and their mean.
pub fn avg_gap(report: &EvalReport, reference: &EvalReport) -> GapReport {
    let d = |a: f64, b: f64| (a - b).abs();
    let (ua, mia, ra, ta) = (
        d(report.ua, reference.ua),
        d(report.mia, reference.mia),
        d(report.ra, reference.ra),
        d(report.ta, reference.ta),
    );
    GapReport { ua, mia, ra, ta, avg_gap: (ua + mia + ra + ta) / 4.0 }
}

/// Rounds to two decimals, halves away from zero. The scaled value is nudged
/// by 1e-9 first so that binary representation error does not flip halves
/// (`1.3675` rounds to `1.37`).
pub fn round2(x: f64) -> f64 {
    let scaled = x * 100.0;
    (scaled + 1e-9f64.copysign(scaled)).round() / 100.0
}

/// Shannon entropy (nats) of a probability vector.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// Mean softmax entropy per ground-truth class; `None` for absent classes.
pub fn class_entropy(theta: &ModelParams, dataset: &Dataset) -> Result<Vec<Option<f64>>> {
    let logits = forward(theta, &dataset.x)?;
    let mut sums = vec![0.0; dataset.classes];
    let mut counts = vec![0usize; dataset.classes];
    for (i, &c) in dataset.y.iter().enumerate() {
        sums[c] += entropy(&softmax_row(logits.row(i)));
        counts[c] += 1;
    }
    Ok(sums.into_iter().zip(counts).map(|(s, n)| (n > 0).then(|| s / n as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_blobs, Split};
    use crate::models::{init_params, Activation, Layer};
    use crate::numcore::RngStream;
    use rand::Rng;

    fn identity_model(c: usize) -> ModelParams {
        ModelParams { layers: vec![Layer { weight: Matrix::identity(c), bias: vec![0.0; c] }], activation: Activation::Identity }
    }

    #[test]
    fn accuracy_all_correct_and_empty() {
        let x = Matrix::identity(3);
        let m = identity_model(3);
        assert_eq!(accuracy(&m, &x, &[0, 1, 2]).unwrap(), 100.0);
        assert!(matches!(accuracy(&m, &Matrix::zeros(0, 3), &[]), Err(Error::EmptyBatch(_))));
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.7, 0.7]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn accuracy_on_random_labels_is_chance() {
        let (n, c) = (6000usize, 4usize);
        let mut r = RngStream::new(8, 0).rng();
        let x = Matrix::from_vec(n, c, (0..n * c).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let y: Vec<usize> = (0..n).map(|_| r.random_range(0..c)).collect();
        let acc = accuracy(&identity_model(c), &x, &y).unwrap() / 100.0;
        let p = 1.0 / c as f64;
        assert!((acc - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{acc}");
    }

    #[test]
    fn ua_examples() {
        // 94.72% forget accuracy: 9472 of 10000 correct
        let c = 2;
        let n = 10_000;
        let mut y = vec![0usize; n];
        y.iter_mut().skip(9472).for_each(|v| *v = 1);
        let x = Matrix::from_vec(n, c, (0..n).flat_map(|_| [1.0, 0.0]).collect()).unwrap();
        let m = identity_model(c);
        assert!((compute_ua(&m, &x, &y).unwrap() - 5.28).abs() < 1e-9);
        assert_eq!(compute_ua(&m, &x, &vec![0; n]).unwrap(), 0.0);
        assert_eq!(compute_ua(&m, &x, &vec![1; n]).unwrap(), 100.0);
        assert!(compute_ua(&m, &Matrix::zeros(0, 2), &[]).is_err());
    }

    #[test]
    fn mia_extremes() {
        let member = [0.1, 0.2, 0.3];
        let nonmember = [0.4, 0.5];
        assert_eq!(mia_from_losses(&[5.0, 6.0], &member, &nonmember).unwrap(), 100.0);
        assert_eq!(mia_from_losses(&[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(mia_from_losses(&[], &member, &nonmember).is_err());
        assert!(mia_from_losses(&[1.0], &[], &nonmember).is_err());
    }

    /// Exhaustive sweep: tries every calibration value as the threshold.
    fn sweep_oracle(forget: &[f64], member: &[f64], nonmember: &[f64]) -> f64 {
        let mut cands: Vec<f64> = member.iter().chain(nonmember).copied().collect();
        cands.sort_by(f64::total_cmp);
        let mut best = (f64::NEG_INFINITY, 0.0);
        for &tau in &cands {
            let tpr = member.iter().filter(|&&l| l < tau).count() as f64 / member.len() as f64;
            let tnr = nonmember.iter().filter(|&&l| l >= tau).count() as f64 / nonmember.len() as f64;
            let ba = 0.5 * (tpr + tnr);
            if ba > best.0 {
                best = (ba, tau);
            }
        }
        100.0 * forget.iter().filter(|&&l| l >= best.1).count() as f64 / forget.len() as f64
    }

    #[test]
    fn mia_matches_threshold_sweep() {
        let mut r = RngStream::new(31, 0).rng();
        for _ in 0..200 {
            let member: Vec<f64> = (0..r.random_range(1..40)).map(|_| r.random_range(0.0..0.5)).collect();
            let nonmember: Vec<f64> = (0..r.random_range(1..40)).map(|_| r.random_range(0.5..1.0)).collect();
            let forget: Vec<f64> = (0..r.random_range(1..30)).map(|_| r.random_range(0.0..1.0)).collect();
            assert_eq!(mia_from_losses(&forget, &member, &nonmember).unwrap(), sweep_oracle(&forget, &member, &nonmember));
            // overlapping and discretized losses exercise ties
            let m2: Vec<f64> = member.iter().map(|v| (v * 6.0).round() / 4.0).collect();
            let n2: Vec<f64> = nonmember.iter().map(|v| (v * 3.0).round() / 4.0).collect();
            let f2: Vec<f64> = forget.iter().map(|v| (v * 4.0).round() / 4.0).collect();
            assert_eq!(mia_from_losses(&f2, &m2, &n2).unwrap(), sweep_oracle(&f2, &m2, &n2));
        }
    }

    #[test]
    fn mia_is_invariant_to_monotone_transforms() {
        let mut r = RngStream::new(32, 0).rng();
        for _ in 0..50 {
            let gen = |r: &mut rand_chacha::ChaCha8Rng, k: usize| -> Vec<f64> { (0..k).map(|_| r.random_range(0.0..3.0)).collect() };
            let (f, m, n) = (gen(&mut r, 20), gen(&mut r, 30), gen(&mut r, 25));
            let base = mia_from_losses(&f, &m, &n).unwrap();
            let t = |v: &Vec<f64>| v.iter().map(|x| (2.0 * x).exp() + 3.0).collect::<Vec<_>>();
            assert_eq!(base, mia_from_losses(&t(&f), &t(&m), &t(&n)).unwrap());
        }
    }

    #[test]
    fn gap_examples() {
        let zero = EvalReport::default();
        let g = avg_gap(&EvalReport::from_array([0.20, 1.90, 2.54, 3.36]), &zero);
        assert!((round2(g.avg_gap) - 2.00).abs() < 1e-9);
        let g = avg_gap(&EvalReport::from_array([0.00, 0.02, 2.37, 3.08]), &zero);
        assert!((round2(g.avg_gap) - 1.37).abs() < 1e-9);
        let r = EvalReport::from_array([5.0, 12.0, 99.0, 90.0]);
        assert_eq!(avg_gap(&r, &r).avg_gap, 0.0);
        let s = EvalReport::from_array([1.0, 7.0, 97.5, 93.0]);
        assert_eq!(avg_gap(&r, &s), avg_gap(&s, &r));
    }

    #[test]
    fn round2_rounds_halves_up() {
        assert_eq!(round2(1.3675), 1.37);
        assert_eq!(round2(2.0), 2.0);
        assert_eq!(round2(0.004), 0.0);
        assert_eq!(round2(-1.005), -1.01);
        assert_eq!(round2(12.3449), 12.34);
    }

    #[test]
    fn entropy_extremes() {
        let c = 4;
        let uniform = ModelParams { layers: vec![Layer::zeros(2, c)], activation: Activation::Identity };
        let ds = gen_blobs(5, c, 2, 0.5, RngStream::new(0, 0)).unwrap();
        for e in class_entropy(&uniform, &ds).unwrap() {
            assert!((e.unwrap() - (c as f64).ln()).abs() < 1e-12);
        }
        let mut sharp = identity_model(3);
        sharp.layers[0].weight.as_mut_slice().iter_mut().for_each(|v| *v *= 1e4);
        let ds = Dataset::new(Matrix::identity(3), vec![0, 1, 2], 3, Split::Train).unwrap();
        for e in class_entropy(&sharp, &ds).unwrap() {
            assert!(e.unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_matches_direct_recomputation() {
        let ds = gen_blobs(10, 3, 2, 0.6, RngStream::new(4, 0)).unwrap();
        let theta = init_params(&[2, 5, 3], RngStream::new(5, 0)).unwrap();
        let got = class_entropy(&theta, &ds).unwrap();
        for c in 0..3 {
            let idx = ds.class_indices(c);
            let mut total = 0.0;
            for &i in &idx {
                let logits = forward(&theta, &ds.x.select_rows(&[i])).unwrap();
                let z = logits.row(0);
                let denom: f64 = z.iter().map(|v| v.exp()).sum();
                total -= z.iter().map(|v| (v.exp() / denom) * (v.exp() / denom).ln()).sum::<f64>();
            }
            let e = got[c].unwrap();
            assert!((e - total / idx.len() as f64).abs() < 1e-12);
            assert!((0.0..=3f64.ln() + 1e-12).contains(&e));
        }
    }

    #[test]
    fn csv_row_format() {
        let r = EvalReport::from_array([5.284, 12.0, 100.0, 94.375]);
        let g = avg_gap(&r, &r);
        assert_eq!(report_csv_row("FT", "random", &r, &g), "FT,random,5.28,12.00,100.00,94.38,0.00");
    }
}
