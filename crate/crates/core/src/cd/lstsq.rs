//! Least-squares residuals via Householder QR.

use crate::scalar::Real;

/// Sum of squared residuals of the least-squares fit of `y` on the columns of
/// `design` (each column has `y.len()` rows). Columns that are numerically
/// dependent on earlier ones are dropped.
pub(crate) fn residual_sum_of_squares<T: Real>(mut design: Vec<Vec<T>>, y: &[T]) -> T {
    let n = y.len();
    let mut rhs = y.to_vec();
    let tol = T::epsilon() * T::lit(1e3);
    let mut row = 0;
    for j in 0..design.len() {
        if row >= n {
            break;
        }
        let col_norm = norm(&design[j]);
        let (head, tail) = design.split_at_mut(j + 1);
        let col = &mut head[j];
        let sub_norm = norm(&col[row..]);
        if sub_norm <= tol * col_norm || sub_norm == T::zero() {
            continue;
        }
        // v = col[row..] + sign(col[row]) * |col[row..]| e_1
        let alpha = if col[row] >= T::zero() { -sub_norm } else { sub_norm };
        let mut v: Vec<T> = col[row..].to_vec();
        v[0] = v[0] - alpha;
        let v_norm_sq: T = v.iter().map(|&a| a * a).sum();
        if v_norm_sq == T::zero() {
            row += 1;
            continue;
        }
        let reflect = |target: &mut [T]| {
            let dot: T = v.iter().zip(target.iter()).map(|(&a, &b)| a * b).sum();
            let f = (dot + dot) / v_norm_sq;
            for (t, &a) in target.iter_mut().zip(v.iter()) {
                *t = *t - f * a;
            }
        };
        for other in tail.iter_mut() {
            reflect(&mut other[row..]);
        }
        reflect(&mut rhs[row..]);
        row += 1;
    }
    rhs[row..].iter().map(|&r| r * r).sum()
}

fn norm<T: Real>(xs: &[T]) -> T {
    xs.iter().map(|&a| a * a).sum::<T>().sqrt()
}
