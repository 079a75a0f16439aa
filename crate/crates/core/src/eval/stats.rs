use serde::{Deserialize, Serialize};

use super::EvalError;

/// Rows are the strong and weak domain, columns are defer / not defer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable2x2 {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable2x2 {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }
}

fn ln_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(0.0);
    let mut acc = 0.0f64;
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// One-sided Fisher exact test: `P(X >= a)` where `X` is the top-left cell
/// under the hypergeometric null with the table's margins.
pub fn fisher_exact_greater(t: ContingencyTable2x2) -> Result<f64, EvalError> {
    let ContingencyTable2x2 { a, b, c, d } = t;
    if a + b == 0 || c + d == 0 {
        return Err(EvalError::DegenerateMargins(t));
    }
    let n = a + b + c + d;
    let row1 = a + b;
    let col1 = a + c;
    let lf = ln_factorials(n);
    let ln_choose = |n: u64, k: u64| lf[n as usize] - lf[k as usize] - lf[(n - k) as usize];
    let denom = ln_choose(n, row1);
    let hi = row1.min(col1);
    let terms: Vec<f64> = (a..=hi)
        .map(|x| ln_choose(col1, x) + ln_choose(n - col1, row1 - x) - denom)
        .collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms.iter().map(|t| (t - m).exp()).sum();
    Ok((m + s.ln()).exp().min(1.0))
}

/// Intersection-union test: the largest component p-value.
pub fn iut_pvalue(pvals: &[f64]) -> Result<f64, EvalError> {
    if pvals.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(&p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(EvalError::InvalidPValue(p));
    }
    Ok(pvals.iter().copied().fold(0.0, f64::max))
}

/// Benjamini-Hochberg step-up adjustment, returned in input order.
pub fn bh_adjust(pvals: &[f64]) -> Vec<f64> {
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| pvals[i].total_cmp(&pvals[j]));
    let mut out = vec![0.0; m];
    let mut running = 1.0f64;
    for rank in (0..m).rev() {
        let i = order[rank];
        running = running.min(pvals[i] * m as f64 / (rank + 1) as f64);
        out[i] = running;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fisher_examples() {
        let p = fisher_exact_greater(ContingencyTable2x2::new(2, 0, 0, 2)).unwrap();
        assert!((p - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(fisher_exact_greater(ContingencyTable2x2::new(0, 5, 0, 3)).unwrap(), 1.0);
        assert!(matches!(
            fisher_exact_greater(ContingencyTable2x2::new(0, 0, 1, 1)),
            Err(EvalError::DegenerateMargins(_))
        ));
    }

    #[test]
    fn iut_examples() {
        assert_eq!(iut_pvalue(&[0.01, 0.2, 0.03]).unwrap(), 0.2);
        assert_eq!(iut_pvalue(&[0.4]).unwrap(), 0.4);
        assert_eq!(iut_pvalue(&[0.3, 0.3]).unwrap(), 0.3);
        assert!(matches!(iut_pvalue(&[]), Err(EvalError::Empty)));
        assert!(iut_pvalue(&[1.5]).is_err());
    }

    #[test]
    fn bh_examples() {
        let q = bh_adjust(&[0.01, 0.04, 0.03, 0.005]);
        for (got, want) in q.iter().zip([0.02, 0.04, 0.04, 0.02]) {
            assert!((got - want).abs() < 1e-15, "{q:?}");
        }
        assert_eq!(bh_adjust(&[0.3]), vec![0.3]);
        assert_eq!(bh_adjust(&[1.0, 1.0]), vec![1.0, 1.0]);
        assert!(bh_adjust(&[]).is_empty());
    }
}
