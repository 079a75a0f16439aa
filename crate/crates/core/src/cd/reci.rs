//! Regression-error based causal inference.
//!
//! Both variables are rescaled to `[0, 1]`; a polynomial of fixed degree is
//! fitted in each direction and the direction with the smaller mean squared
//! residual is taken as effect-given-cause.

use super::lstsq::residual_sum_of_squares;
use super::{check_columns, min_max, CdError, CdKind, DirectionScore};
use crate::scalar::Real;

pub const DEFAULT_DEGREE: usize = 3;

pub fn reci<T: Real>(x: &[T], y: &[T], degree: usize) -> Result<DirectionScore<T>, CdError> {
    if degree == 0 {
        return Err(CdError::DegenerateInput("polynomial degree must be positive"));
    }
    check_columns(x, y, degree + 2)?;
    let xs = rescale(x)?;
    let ys = rescale(y)?;
    let mse_fwd = poly_mse(&xs, &ys, degree);
    let mse_bwd = poly_mse(&ys, &xs, degree);
    Ok(DirectionScore::from_losses(mse_fwd, mse_bwd, CdKind::Reci))
}

fn rescale<T: Real>(v: &[T]) -> Result<Vec<T>, CdError> {
    let (lo, hi) = min_max(v);
    let range = hi - lo;
    if !(range > T::zero()) {
        return Err(CdError::DegenerateInput("constant column"));
    }
    Ok(v.iter().map(|&a| (a - lo) / range).collect())
}

/// Mean squared residual of regressing `target` on a degree-`degree`
/// polynomial of `input` (both already in `[0, 1]`). Uses the Legendre basis
/// on `[-1, 1]`, which spans the same space as the monomials.
fn poly_mse<T: Real>(input: &[T], target: &[T], degree: usize) -> T {
    let n = input.len();
    let two = T::lit(2.0);
    let t: Vec<T> = input.iter().map(|&a| two * a - T::one()).collect();
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(degree + 1);
    basis.push(vec![T::one(); n]);
    basis.push(t.clone());
    for k in 1..degree {
        let kf = T::from_count(k);
        let next: Vec<T> = (0..n)
            .map(|i| {
                ((two * kf + T::one()) * t[i] * basis[k][i] - kf * basis[k - 1][i])
                    / (kf + T::one())
            })
            .collect();
        basis.push(next);
    }
    residual_sum_of_squares(basis, target) / T::from_count(n)
}
