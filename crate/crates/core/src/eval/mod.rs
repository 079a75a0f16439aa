//! Experiment harness: hold-out accuracies per (CD method, expert), model
//! selection by leave-one-out, and the domain-consistency test.

mod consistency;
mod loo;
mod stats;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cd::{CdError, CdMethod, Direction};
use crate::data::{CausalPair, Domain};
use crate::defer::{baseline_predict, train_or_fallback, DeferError, DeferralInstance, ForestHyperparams};
use crate::experts::{Expert, ExpertError, ExpertKind};
use crate::features::FeaturizerConfig;
use crate::rng::{keyed_rng, Stream};
use crate::scalar::Real;

pub use consistency::{adjust_jointly, domain_consistency, partition_domains, ConsistencyReport, PairTest, SIGNIFICANCE};
pub use loo::{loo_select, paper_grid, GridPoint, LooSelection};
pub use stats::{bh_adjust, fisher_exact_greater, iut_pvalue, ContingencyTable2x2};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    Empty,
    #[error("empty hyperparameter grid")]
    EmptyGrid,
    #[error("empty test set")]
    EmptyTestSet,
    #[error("no observations for domain {0}")]
    EmptyDomain(Domain),
    #[error("expert has no strong or no weak domain")]
    NoContrast,
    #[error("table has an empty row: {0:?}")]
    DegenerateMargins(ContingencyTable2x2),
    #[error("p-value {0} outside [0, 1]")]
    InvalidPValue(f64),
    #[error("need as many baseline seeds as training seeds ({train} vs {baseline})")]
    SeedMismatch { train: usize, baseline: usize },
    #[error("no CD prediction for pair {0}")]
    MissingCdPrediction(u32),
    #[error("pair {id}: {source}")]
    Cd { id: u32, source: CdError },
    #[error(transparent)]
    Defer(#[from] DeferError),
    #[error(transparent)]
    Expert(#[from] ExpertError),
}

/// Mean over seeds and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `se` is the sample standard deviation over `sqrt(n)`, and exactly zero
    /// when every value is equal.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN };
        }
        if values.iter().all(|&v| v == values[0]) {
            return Self { mean: values[0], se: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Self {
            mean,
            se: (var / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Unweighted,
    /// Use each pair's benchmark weight.
    PairWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub cd_name: String,
    pub expert_name: String,
    pub cd_acc: Estimate,
    pub expert_acc: Estimate,
    pub l2d_acc: Estimate,
    pub baseline_acc: Estimate,
    pub n_seeds: usize,
}

/// One test pair under one seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub pair_id: u32,
    pub domain: Domain,
    pub weight: f64,
    pub truth: Direction,
    pub cd_pred: Direction,
    pub expert_pred: Direction,
    pub l2d_chose_expert: bool,
    pub l2d_pred: Direction,
    pub baseline_chose_expert: bool,
    pub baseline_pred: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub train_seed: u64,
    pub baseline_seed: u64,
    pub s_size: usize,
    pub baseline_p: f64,
    pub records: Vec<TestRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboResult {
    pub row: AccuracyRow,
    pub expert_kind: ExpertKind,
    pub runs: Vec<SeedRun>,
}

/// Settings shared by every (CD, expert) combination of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub featurizer: FeaturizerConfig,
    pub hp: ForestHyperparams,
    pub train_seeds: Vec<u64>,
    pub baseline_seeds: Vec<u64>,
    #[serde(default)]
    pub weighting: Weighting,
}

impl ExperimentSettings {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.train_seeds.is_empty() {
            return Err(EvalError::Empty);
        }
        if self.train_seeds.len() != self.baseline_seeds.len() {
            return Err(EvalError::SeedMismatch {
                train: self.train_seeds.len(),
                baseline: self.baseline_seeds.len(),
            });
        }
        Ok(())
    }
}

/// CD predictions for every pair.
pub fn cd_predictions<T: Real>(
    pairs: &[CausalPair<T>],
    method: &CdMethod,
) -> Result<BTreeMap<u32, Direction>, EvalError> {
    pairs
        .iter()
        .map(|p| {
            method
                .score(&p.x_u, &p.x_v)
                .map(|s| (p.id, s.direction))
                .map_err(|source| EvalError::Cd { id: p.id, source })
        })
        .collect()
}

/// Simulated CD method that is right on each pair with probability
/// `accuracy`, drawn from a stream keyed by `(seed, pair id)`.
pub fn stub_cd_predictions<T: Real>(pairs: &[CausalPair<T>], accuracy: f64, seed: u64) -> BTreeMap<u32, Direction> {
    pairs
        .iter()
        .map(|p| {
            let mut rng = keyed_rng(seed, Stream::CdStub, u64::from(p.id));
            let right = rng.random::<f64>() < accuracy;
            (p.id, if right { p.truth } else { p.truth.flip() })
        })
        .collect()
}

pub(crate) fn instances<T: Real>(
    pairs: &[CausalPair<T>],
    cd_preds: &BTreeMap<u32, Direction>,
    expert: &Expert,
) -> Result<Vec<DeferralInstance>, EvalError> {
    pairs
        .iter()
        .map(|p| {
            let cd_pred = *cd_preds.get(&p.id).ok_or(EvalError::MissingCdPrediction(p.id))?;
            Ok(DeferralInstance {
                id: p.id,
                description: p.description.clone(),
                domain: p.domain,
                cd_pred,
                expert_pred: expert.predict(p)?.direction,
                truth: p.truth,
            })
        })
        .collect()
}

fn accuracy(records: &[TestRecord], weighting: Weighting, pick: impl Fn(&TestRecord) -> Direction) -> f64 {
    let w = |r: &TestRecord| match weighting {
        Weighting::Unweighted => 1.0,
        Weighting::PairWeights => r.weight,
    };
    let total: f64 = records.iter().map(w).sum();
    let right: f64 = records.iter().filter(|r| pick(r) == r.truth).map(w).sum();
    right / total
}

/// Trains and evaluates one (CD, expert) combination for every seed.
///
/// Training seed `s` reseeds both the expert and the forest; the baseline
/// for that run samples with the baseline seed at the same position.
pub fn evaluate_combo<T: Real>(
    train: &[CausalPair<T>],
    test: &[CausalPair<T>],
    cd_name: &str,
    cd_preds: &BTreeMap<u32, Direction>,
    expert: &Expert,
    settings: &ExperimentSettings,
) -> Result<ComboResult, EvalError> {
    settings.validate()?;
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let mut runs = Vec::with_capacity(settings.train_seeds.len());
    for (&seed, &baseline_seed) in settings.train_seeds.iter().zip(&settings.baseline_seeds) {
        let expert = expert.reseeded(seed);
        let hp = ForestHyperparams { seed, ..settings.hp };
        let model = train_or_fallback::<T>(&instances(train, cd_preds, &expert)?, &settings.featurizer, &hp)?;
        let test_inst = instances(test, cd_preds, &expert)?;
        let records = test_inst
            .iter()
            .zip(test)
            .map(|(i, p)| {
                let d = model.decide(&i.description, i.cd_pred, i.expert_pred)?;
                let b = baseline_predict(model.baseline_p, i.cd_pred, i.expert_pred, baseline_seed, i.id)?;
                Ok(TestRecord {
                    pair_id: i.id,
                    domain: i.domain,
                    weight: p.weight.as_f64(),
                    truth: i.truth,
                    cd_pred: i.cd_pred,
                    expert_pred: i.expert_pred,
                    l2d_chose_expert: d.chose_expert,
                    l2d_pred: d.prediction,
                    baseline_chose_expert: b.chose_expert,
                    baseline_pred: b.prediction,
                })
            })
            .collect::<Result<Vec<_>, EvalError>>()?;
        runs.push(SeedRun {
            train_seed: seed,
            baseline_seed,
            s_size: model.s_size,
            baseline_p: model.baseline_p,
            records,
        });
    }
    let est = |pick: fn(&TestRecord) -> Direction| {
        let v: Vec<f64> = runs.iter().map(|r| accuracy(&r.records, settings.weighting, pick)).collect();
        Estimate::from_values(&v)
    };
    let row = AccuracyRow {
        cd_name: cd_name.to_string(),
        expert_name: expert.name(),
        cd_acc: est(|r| r.cd_pred),
        expert_acc: est(|r| r.expert_pred),
        l2d_acc: est(|r| r.l2d_pred),
        baseline_acc: est(|r| r.baseline_pred),
        n_seeds: runs.len(),
    };
    Ok(ComboResult {
        row,
        expert_kind: expert.kind(),
        runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    L2d,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyEntry {
    pub expert: String,
    pub rule: Rule,
    pub report: ConsistencyReport,
}

/// Pools the deferral indicators of every combo that used `expert_name`, over
/// CD methods, seeds and test pairs.
pub fn pooled_observations(results: &[ComboResult], expert_name: &str, rule: Rule) -> Vec<(Domain, bool)> {
    results
        .iter()
        .filter(|r| r.row.expert_name == expert_name)
        .flat_map(|r| r.runs.iter().flat_map(|run| run.records.iter()))
        .map(|rec| {
            let deferred = match rule {
                Rule::L2d => rec.l2d_chose_expert,
                Rule::Baseline => rec.baseline_chose_expert,
            };
            (rec.domain, deferred)
        })
        .collect()
}

/// Consistency of both rules for every synthetic expert with a strong/weak
/// contrast, with one joint Benjamini-Hochberg correction.
pub fn consistency_entries(results: &[ComboResult], experts: &[Expert]) -> Result<Vec<ConsistencyEntry>, EvalError> {
    let mut out = Vec::new();
    for e in experts {
        let Expert::Synthetic(spec) = e else { continue };
        let (strong, weak) = partition_domains(&spec.p_by_domain);
        if strong.is_empty() || weak.is_empty() {
            continue;
        }
        for rule in [Rule::L2d, Rule::Baseline] {
            let obs = pooled_observations(results, &spec.name, rule);
            out.push(ConsistencyEntry {
                expert: spec.name.clone(),
                rule,
                report: domain_consistency(&obs, &spec.p_by_domain)?,
            });
        }
    }
    adjust_jointly(out.iter_mut().map(|e| &mut e.report));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<AccuracyRow>,
    pub consistency: Vec<ConsistencyEntry>,
}

impl BenchmarkReport {
    pub fn assemble(results: &[ComboResult], experts: &[Expert]) -> Result<Self, EvalError> {
        Ok(Self {
            rows: results.iter().map(|r| r.row.clone()).collect(),
            consistency: consistency_entries(results, experts)?,
        })
    }
}

/// Every (CD, expert) combination in CD-major order.
pub fn run_benchmark<T: Real>(
    train: &[CausalPair<T>],
    test: &[CausalPair<T>],
    cd: &[(String, BTreeMap<u32, Direction>)],
    experts: &[Expert],
    settings: &ExperimentSettings,
) -> Result<(BenchmarkReport, Vec<ComboResult>), EvalError> {
    let mut results = Vec::with_capacity(cd.len() * experts.len());
    for (name, preds) in cd {
        for e in experts {
            results.push(evaluate_combo(train, test, name, preds, e, settings)?);
        }
    }
    Ok((BenchmarkReport::assemble(&results, experts)?, results))
}

const CSV_HEADER: &str = "cd,expert,n_seeds,cd_acc,cd_se,expert_acc,expert_se,l2d_acc,l2d_se,baseline_acc,baseline_se";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One line per combination, accuracies with six decimals.
pub fn accuracy_csv(rows: &[AccuracyRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{},{}", csv_field(&r.cd_name), csv_field(&r.expert_name), r.n_seeds);
        for e in [r.cd_acc, r.expert_acc, r.l2d_acc, r.baseline_acc] {
            let _ = write!(out, ",{:.6},{:.6}", e.mean, e.se);
        }
        out.push('\n');
    }
    out
}
