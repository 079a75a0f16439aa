//! Quantile-scoring direction test.
//!
//! For each direction and each quantile level, the conditional quantile of the
//! candidate effect at every sample is estimated from its `k` nearest
//! neighbors in the candidate cause (the sample itself excluded). The pinball
//! loss of those estimates is divided by the pinball loss of the unconditional
//! quantile at the same level, and the ratios are summed over levels. The
//! direction with the smaller total is taken as effect-given-cause.

use std::cmp::Ordering;

use super::{check_columns, min_max, CdError, CdKind, DirectionScore};
use crate::scalar::Real;

pub const DEFAULT_QUANTILES: [f64; 3] = [0.25, 0.5, 0.75];

/// `max(10, floor(sqrt(n)))`.
pub fn default_neighbors(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).max(10)
}

pub fn bqcd_lite<T: Real>(
    x: &[T],
    y: &[T],
    quantiles: &[f64],
    k: usize,
) -> Result<DirectionScore<T>, CdError> {
    check_columns(x, y, 2)?;
    if quantiles.is_empty() {
        return Err(CdError::DegenerateInput("empty quantile list"));
    }
    if let Some(&q) = quantiles.iter().find(|&&q| !(q > 0.0 && q < 1.0)) {
        return Err(CdError::InvalidQuantile(q));
    }
    let n = x.len();
    if k == 0 || k >= n {
        return Err(CdError::InvalidNeighbors { k, n });
    }
    for col in [x, y] {
        let (lo, hi) = min_max(col);
        if !(hi > lo) {
            return Err(CdError::DegenerateInput("constant column"));
        }
    }
    let taus: Vec<T> = quantiles.iter().map(|&q| T::lit(q)).collect();
    let fwd = directional_loss(x, y, &taus, k);
    let bwd = directional_loss(y, x, &taus, k);
    Ok(DirectionScore::from_losses(fwd, bwd, CdKind::BqcdLite))
}

fn directional_loss<T: Real>(cause: &[T], effect: &[T], taus: &[T], k: usize) -> T {
    let neighbors = knn_1d(cause, k);
    let mut sorted_effect = effect.to_vec();
    sorted_effect.sort_by(total_cmp);

    let mut total = T::zero();
    let mut buf = vec![T::zero(); k];
    for &tau in taus {
        let q_marginal = quantile_sorted(&sorted_effect, tau);
        let marginal: T = effect.iter().map(|&e| pinball(e - q_marginal, tau)).sum();
        let mut conditional = T::zero();
        for (i, nbrs) in neighbors.iter().enumerate() {
            for (slot, &j) in buf.iter_mut().zip(nbrs) {
                *slot = effect[j];
            }
            buf.sort_by(total_cmp);
            conditional = conditional + pinball(effect[i] - quantile_sorted(&buf, tau), tau);
        }
        total = total + conditional / marginal;
    }
    total
}

fn total_cmp<T: Real>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).expect("finite values")
}

fn pinball<T: Real>(residual: T, tau: T) -> T {
    if residual >= T::zero() {
        tau * residual
    } else {
        (tau - T::one()) * residual
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted<T: Real>(sorted: &[T], tau: T) -> T {
    let pos = tau * T::from_count(sorted.len() - 1);
    let lo = pos.floor();
    let i = lo.to_usize().unwrap_or(0).min(sorted.len() - 1);
    let frac = pos - lo;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// `k` nearest neighbors of every sample in one dimension, excluding the
/// sample itself. Distance ties are broken deterministically.
fn knn_1d<T: Real>(v: &[T], k: usize) -> Vec<Vec<usize>> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| total_cmp(&v[a], &v[b]).then(a.cmp(&b)));
    let mut rank = vec![0usize; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let closer = |i: usize, a: usize, b: usize| -> bool {
        let da = (v[a] - v[i]).abs();
        let db = (v[b] - v[i]).abs();
        da < db || (da == db && a < b)
    };
    (0..n)
        .map(|i| {
            let r = rank[i];
            let (mut left, mut right) = (r, r + 1);
            let mut out = Vec::with_capacity(k);
            while out.len() < k {
                let l = if left > 0 { Some(order[left - 1]) } else { None };
                let rr = if right < n { Some(order[right]) } else { None };
                let pick = match (l, rr) {
                    (Some(a), Some(b)) => {
                        if closer(i, a, b) {
                            left -= 1;
                            a
                        } else {
                            right += 1;
                            b
                        }
                    }
                    (Some(a), None) => {
                        left -= 1;
                        a
                    }
                    (None, Some(b)) => {
                        right += 1;
                        b
                    }
                    (None, None) => break,
                };
                out.push(pick);
            }
            out
        })
        .collect()
}
