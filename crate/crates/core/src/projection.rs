//! Euclidean projection onto the capped simplex
//! `S = { w in [0,1]^N : sum(w) = m }`.
//!
//! The projection of `a` is `clamp01(a - λ·1)` where the shift `λ` solves
//! `sum(clamp01(a - λ)) = m`. The left-hand side is continuous and
//! nonincreasing in `λ`, equals `N` at `min(a) - 1` and `0` at `max(a)`, so
//! bisection on that bracket always succeeds. Over a flat stretch of the sum
//! every shift gives the same projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{bisect_root, BISECT_MAX_ITER, BISECT_TOL};

/// Largest tolerated `|sum(w) - m|` for a projected point.
pub const SUM_TOL: f64 = 1e-8;

/// Relaxed selection scores with their budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionWeights {
    pub w: Vec<f64>,
    pub budget: usize,
}

impl SelectionWeights {
    /// Uniform `m / N` weights, the barycenter of `S`.
    pub fn uniform(n: usize, m: usize) -> Result<Self> {
        if m > n {
            return Err(Error::Budget { m, n });
        }
        let v = if n == 0 { 0.0 } else { m as f64 / n as f64 };
        Ok(Self { w: vec![v; n], budget: m })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn is_feasible(&self) -> bool {
        self.w.iter().all(|&v| (0.0..=1.0).contains(&v))
            && (self.w.iter().sum::<f64>() - self.budget as f64).abs() <= SUM_TOL
    }
}

#[inline]
fn clamp_unit(v: f64) -> f64 {
    if v < 0.0 {
        0.0
    } else if v > 1.0 {
        1.0
    } else {
        v
    }
}

/// Element-wise clamp to `[0, 1]`.
pub fn clamp01(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| clamp_unit(v)).collect()
}

fn shifted_sum(a: &[f64], shift: f64) -> f64 {
    a.iter().map(|&v| clamp_unit(v - shift)).sum()
}

/// Projects `a` onto the capped simplex with budget `m`.
pub fn project_capped_simplex(a: &[f64], m: usize) -> Result<SelectionWeights> {
    let n = a.len();
    if m > n {
        return Err(Error::Budget { m, n });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::BadSpec("projection input must be finite".into()));
    }
    if m == 0 {
        return Ok(SelectionWeights { w: vec![0.0; n], budget: 0 });
    }
    if m == n {
        return Ok(SelectionWeights { w: vec![1.0; n], budget: m });
    }

    let target = m as f64;
    let lo = a.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut shift = bisect_root(|s| shifted_sum(a, s) - target, lo, hi, BISECT_TOL, BISECT_MAX_ITER)?;

    // Exact solve on the active set found by bisection: entries strictly
    // inside (0, 1) move one-for-one with the shift.
    let residual = |s: f64| (shifted_sum(a, s) - target).abs();
    let (mut interior_sum, mut interior, mut at_one) = (0.0, 0usize, 0usize);
    for &v in a {
        let t = v - shift;
        if t >= 1.0 {
            at_one += 1;
        } else if t > 0.0 {
            interior_sum += v;
            interior += 1;
        }
    }
    if interior > 0 {
        let exact = (interior_sum + at_one as f64 - target) / interior as f64;
        if residual(exact) < residual(shift) {
            shift = exact;
        }
    }

    let w: Vec<f64> = a.iter().map(|&v| clamp_unit(v - shift)).collect();
    Ok(SelectionWeights { w, budget: m })
}
