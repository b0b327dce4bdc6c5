//! Brute-force references for tiny instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ForgetMask};
use crate::error::{Error, Result};
use crate::metrics::compute_ua;
use crate::models::ModelParams;
use crate::unlearn::{retrain, UnlearnConfig};

/// Default cap on the number of enumerated subsets.
pub const MAX_SUBSETS: u128 = 10_000;
/// Largest dimension accepted by [`qp_project_oracle`].
pub const MAX_QP_DIM: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub subset: Vec<usize>,
    pub ua: f64,
}

/// `C(n, k)`, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i + 1) as u128;
    }
    acc
}

/// All size-`k` subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(pos) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[pos] += 1;
        for j in pos + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Retrains on the complement of every size-`m` subset (same seed for all)
/// and ranks the subsets by UA, ascending; equal UA keeps lexicographic
/// subset order. The lowest-UA subsets are the hardest to forget.
///
/// Refuses more than [`MAX_SUBSETS`] subsets unless `force` is set.
pub fn enumerate_worst(
    theta_o: &ModelParams,
    dataset: &Dataset,
    m: usize,
    config: &UnlearnConfig,
    force: bool,
) -> Result<Vec<SubsetScore>> {
    let n = dataset.len();
    if m == 0 || m > n {
        return Err(Error::BadSpec(format!("subset size {m} must be in 1..={n}")));
    }
    let count = binomial(n, m);
    if count > MAX_SUBSETS && !force {
        return Err(Error::TooLarge(format!("C({n}, {m}) = {count} subsets exceeds {MAX_SUBSETS}")));
    }
    let subsets = combinations(n, m);
    let mut scores = subsets
        .into_par_iter()
        .map(|subset| score_subset(theta_o, dataset, subset, config))
        .collect::<Result<Vec<_>>>()?;
    // stable: ties keep enumeration order
    scores.sort_by(|a, b| a.ua.total_cmp(&b.ua));
    Ok(scores)
}

fn score_subset(theta_o: &ModelParams, dataset: &Dataset, subset: Vec<usize>, config: &UnlearnConfig) -> Result<SubsetScore> {
    let mask = ForgetMask::new(subset, dataset.len())?;
    let (forget, _) = dataset.partition(&mask);
    let ua = if mask.len() == dataset.len() {
        // nothing left to train on: the retrained model knows nothing
        100.0
    } else {
        let theta_u = retrain(theta_o, dataset, &mask, config)?;
        compute_ua(&theta_u, &forget.x, &forget.y)?
    };
    Ok(SubsetScore { subset: mask.indices().to_vec(), ua })
}

/// Fraction of ranked subsets whose UA is strictly below `ua`.
pub fn fraction_strictly_below(ranking: &[SubsetScore], ua: f64) -> f64 {
    if ranking.is_empty() {
        return 0.0;
    }
    ranking.iter().filter(|s| s.ua < ua).count() as f64 / ranking.len() as f64
}

/// Exact projection onto `{w in [0,1]^N : sum(w) = m}` by enumerating every
/// assignment of coordinates to {at 0, interior, at 1}, solving each
/// equality-constrained face in closed form, and keeping the closest
/// feasible candidate.
pub fn qp_project_oracle(a: &[f64], m: usize) -> Result<Vec<f64>> {
    let n = a.len();
    if n > MAX_QP_DIM {
        return Err(Error::TooLarge(format!("qp oracle dimension {n} exceeds {MAX_QP_DIM}")));
    }
    if m > n {
        return Err(Error::Budget { m, n });
    }
    let target = m as f64;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let total = 3usize.pow(n as u32);
    let mut pattern = vec![0u8; n];
    for code in 0..total {
        let mut c = code;
        for p in pattern.iter_mut() {
            *p = (c % 3) as u8;
            c /= 3;
        }
        let ones = pattern.iter().filter(|&&p| p == 2).count() as f64;
        let interior: Vec<usize> = (0..n).filter(|&i| pattern[i] == 1).collect();
        let mut w = vec![0.0; n];
        for i in 0..n {
            if pattern[i] == 2 {
                w[i] = 1.0;
            }
        }
        if interior.is_empty() {
            if (ones - target).abs() > 1e-12 {
                continue;
            }
        } else {
            let sum_a: f64 = interior.iter().map(|&i| a[i]).sum();
            let shift = (sum_a + ones - target) / interior.len() as f64;
            let mut ok = true;
            for &i in &interior {
                let v = a[i] - shift;
                if !(-1e-12..=1.0 + 1e-12).contains(&v) {
                    ok = false;
                    break;
                }
                w[i] = v.clamp(0.0, 1.0);
            }
            if !ok {
                continue;
            }
        }
        let dist: f64 = w.iter().zip(a).map(|(x, y)| (x - y).powi(2)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, w));
        }
    }
    best.map(|(_, w)| w).ok_or_else(|| Error::BadSpec("no feasible pattern".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_blobs;
    use crate::numcore::RngStream;
    use crate::unlearn::{train, Method};

    #[test]
    fn combinations_count_and_order() {
        let c = combinations(5, 2);
        assert_eq!(c.len() as u128, binomial(5, 2));
        assert_eq!(c[0], vec![0, 1]);
        assert_eq!(c[9], vec![3, 4]);
        assert_eq!(combinations(4, 4), vec![vec![0, 1, 2, 3]]);
        assert_eq!(binomial(12, 3), 220);
        assert_eq!(binomial(3, 5), 0);
    }

    fn tiny() -> (Dataset, ModelParams, UnlearnConfig) {
        let ds = gen_blobs(3, 2, 2, 0.8, RngStream::new(4, 0)).unwrap();
        let theta = train(&ds, &[2, 2], 50, 0.5, RngStream::new(0, 0)).unwrap();
        let cfg = UnlearnConfig { method: Method::Retrain, epochs: 50, lr: 0.5, ..Default::default() };
        (ds, theta, cfg)
    }

    #[test]
    fn full_budget_is_one_subset() {
        let (ds, theta, cfg) = tiny();
        let r = enumerate_worst(&theta, &ds, ds.len(), &cfg, false).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].subset, (0..ds.len()).collect::<Vec<_>>());
    }

    #[test]
    fn singletons_match_direct_retrain() {
        let (ds, theta, cfg) = tiny();
        let ranked = enumerate_worst(&theta, &ds, 1, &cfg, false).unwrap();
        assert_eq!(ranked.len(), 6);
        assert!(ranked.windows(2).all(|w| w[0].ua <= w[1].ua));
        for s in &ranked {
            let mask = ForgetMask::new(s.subset.clone(), ds.len()).unwrap();
            let theta_u = retrain(&theta, &ds, &mask, &cfg).unwrap();
            let f = ds.subset(&s.subset);
            assert_eq!(compute_ua(&theta_u, &f.x, &f.y).unwrap(), s.ua);
        }
    }

    #[test]
    fn duplicate_rows_score_equally() {
        let (mut ds, theta, cfg) = tiny();
        let row = ds.x.row(0).to_vec();
        ds.x.row_mut(2).copy_from_slice(&row);
        ds.y[2] = ds.y[0];
        let ranked = enumerate_worst(&theta, &ds, 1, &cfg, false).unwrap();
        let ua = |i: usize| ranked.iter().find(|s| s.subset == vec![i]).unwrap().ua;
        assert!((ua(0) - ua(2)).abs() < 1e-9);
    }

    #[test]
    fn guard_trips_unless_forced() {
        let ds = gen_blobs(20, 2, 2, 0.5, RngStream::new(0, 0)).unwrap();
        let theta = train(&ds, &[2, 2], 1, 0.5, RngStream::new(0, 0)).unwrap();
        let cfg = UnlearnConfig::new(Method::Retrain);
        assert!(matches!(enumerate_worst(&theta, &ds, 10, &cfg, false), Err(Error::TooLarge(_))));
        assert!(enumerate_worst(&theta, &ds, 0, &cfg, false).is_err());
    }

    #[test]
    fn qp_oracle_basics() {
        assert_eq!(qp_project_oracle(&[1.0, 0.0, 0.0], 1).unwrap(), vec![1.0, 0.0, 0.0]);
        for v in qp_project_oracle(&[0.4; 6], 3).unwrap() {
            assert!((v - 0.5).abs() < 1e-12);
        }
        assert!(matches!(qp_project_oracle(&[0.0; 13], 2), Err(Error::TooLarge(_))));
    }

    #[test]
    fn qp_oracle_agrees_with_grid_scan() {
        // dense scan of the shift on a fine grid, independent of both solvers
        let a = [0.9, 0.2, 0.7, 0.4, 0.1];
        let w = qp_project_oracle(&a, 2).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        let steps = 2_000_000;
        for k in 0..=steps {
            let s = -0.9 + 1.8 * k as f64 / steps as f64;
            let r = (a.iter().map(|v| (v - s).clamp(0.0, 1.0)).sum::<f64>() - 2.0).abs();
            if r < best.0 {
                best = (r, s);
            }
        }
        for (wi, ai) in w.iter().zip(a) {
            assert!((wi - (ai - best.1).clamp(0.0, 1.0)).abs() < 1e-6);
        }
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12);
    }
}
