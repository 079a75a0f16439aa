//! Pairwise LiNGAM likelihood ratio with maximum-entropy entropy estimates.

use super::{check_columns, CdError, CdKind, DirectionScore};
use crate::scalar::{mean, variance, Real};

/// `(k1, k2, gamma)` of the maximum-entropy approximation
/// `H(u) = (1 + ln 2pi)/2 - k1 (E[log cosh u] - gamma)^2 - k2 (E[u exp(-u^2/2)])^2`.
pub const ENTROPY_CONSTANTS: (f64, f64, f64) = (79.047, 7.4129, 0.37457);

/// Differential entropy approximation of a standardized sample.
pub fn max_ent_entropy<T: Real>(u: &[T]) -> T {
    let (k1, k2, gamma) = ENTROPY_CONSTANTS;
    let h_gauss = T::lit(0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln()));
    let half = T::lit(0.5);
    let log_cosh = mean(&u.iter().map(|&v| log_cosh(v)).collect::<Vec<_>>());
    let gauss_moment = mean(&u.iter().map(|&v| v * (-half * v * v).exp()).collect::<Vec<_>>());
    let a = log_cosh - T::lit(gamma);
    h_gauss - T::lit(k1) * a * a - T::lit(k2) * gauss_moment * gauss_moment
}

// stable for large |v|
fn log_cosh<T: Real>(v: T) -> T {
    let a = v.abs();
    a + (-(a + a)).exp().ln_1p() - T::lit(std::f64::consts::LN_2)
}

fn standardize<T: Real>(v: &[T]) -> Result<Vec<T>, CdError> {
    let m = mean(v);
    let sd = variance(v).sqrt();
    if !(sd > T::zero()) {
        return Err(CdError::DegenerateInput("zero standard deviation"));
    }
    Ok(v.iter().map(|&a| (a - m) / sd).collect())
}

/// Standardized residual of regressing `b` on `a` (both standardized).
fn residual<T: Real>(a: &[T], b: &[T], rho: T) -> Vec<T> {
    let r: Vec<T> = a.iter().zip(b).map(|(&ai, &bi)| bi - rho * ai).collect();
    let sd = (T::one() - rho * rho).max(T::zero()).sqrt();
    if sd > T::epsilon() {
        r.iter().map(|&v| v / sd).collect()
    } else {
        // perfectly collinear; both residuals vanish symmetrically
        vec![T::zero(); r.len()]
    }
}

pub fn pair_lingam<T: Real>(x: &[T], y: &[T]) -> Result<DirectionScore<T>, CdError> {
    check_columns(x, y, 3)?;
    let xs = standardize(x)?;
    let ys = standardize(y)?;
    let rho = mean(&xs.iter().zip(&ys).map(|(&a, &b)| a * b).collect::<Vec<_>>());
    let r_yx = residual(&xs, &ys, rho);
    let r_xy = residual(&ys, &xs, rho);
    // grouped so that swapping the arguments negates the ratio exactly
    let ratio = (max_ent_entropy(&xs) - max_ent_entropy(&ys))
        + (max_ent_entropy(&r_yx) - max_ent_entropy(&r_xy));
    let direction = if ratio <= T::zero() {
        super::Direction::Forward
    } else {
        super::Direction::Backward
    };
    Ok(DirectionScore {
        direction,
        score: ratio.abs(),
        method: CdKind::PairLingam,
    })
}
