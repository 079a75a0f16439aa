//! Does a deferral rule defer more often on the expert's strong domains?
//!
//! For every (strong, weak) domain pair a one-sided Fisher test compares the
//! pooled deferral rates. The composite p-value is their maximum, and the
//! composites of all rules and experts are adjusted together with
//! Benjamini-Hochberg.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{bh_adjust, fisher_exact_greater, iut_pvalue, ContingencyTable2x2};
use super::EvalError;
use crate::data::Domain;

pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub strong: Domain,
    pub weak: Domain,
    pub table: ContingencyTable2x2,
    pub pval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub per_pair: Vec<PairTest>,
    pub iut_pval: f64,
    pub corrected_pval: f64,
    pub consistent: bool,
}

/// Strong domains have `p_d > 0.5`, weak ones `p_d < 0.5`.
pub fn partition_domains(p_by_domain: &BTreeMap<Domain, f64>) -> (Vec<Domain>, Vec<Domain>) {
    let strong = p_by_domain.iter().filter(|(_, &p)| p > 0.5).map(|(d, _)| *d).collect();
    let weak = p_by_domain.iter().filter(|(_, &p)| p < 0.5).map(|(d, _)| *d).collect();
    (strong, weak)
}

/// `observations` holds one `(domain, deferred)` entry per pooled decision.
/// The corrected p-value is the report's own until [`adjust_jointly`] runs.
pub fn domain_consistency(
    observations: &[(Domain, bool)],
    p_by_domain: &BTreeMap<Domain, f64>,
) -> Result<ConsistencyReport, EvalError> {
    let (strong, weak) = partition_domains(p_by_domain);
    if strong.is_empty() || weak.is_empty() {
        return Err(EvalError::NoContrast);
    }
    let mut counts: BTreeMap<Domain, (u64, u64)> = BTreeMap::new();
    for &(d, deferred) in observations {
        let e = counts.entry(d).or_default();
        if deferred {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let get = |d: Domain| counts.get(&d).copied().ok_or(EvalError::EmptyDomain(d));
    let mut per_pair = Vec::with_capacity(strong.len() * weak.len());
    for &s in &strong {
        let (a, b) = get(s)?;
        for &w in &weak {
            let (c, d) = get(w)?;
            let table = ContingencyTable2x2 { a, b, c, d };
            per_pair.push(PairTest {
                strong: s,
                weak: w,
                table,
                pval: fisher_exact_greater(table)?,
            });
        }
    }
    let pvals: Vec<f64> = per_pair.iter().map(|t| t.pval).collect();
    let iut = iut_pvalue(&pvals)?;
    Ok(ConsistencyReport {
        per_pair,
        iut_pval: iut,
        corrected_pval: iut,
        consistent: iut < SIGNIFICANCE,
    })
}

/// Benjamini-Hochberg over the composite p-values of all reports.
pub fn adjust_jointly<'a>(reports: impl IntoIterator<Item = &'a mut ConsistencyReport>) {
    let mut reports: Vec<&mut ConsistencyReport> = reports.into_iter().collect();
    let raw: Vec<f64> = reports.iter().map(|r| r.iut_pval).collect();
    for (r, q) in reports.iter_mut().zip(bh_adjust(&raw)) {
        r.corrected_pval = q;
        r.consistent = q < SIGNIFICANCE;
    }
}
