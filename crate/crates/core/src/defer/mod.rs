//! Learning to defer between a causal discovery method and an expert.
//!
//! Training reduces to binary classification on the pairs where the two
//! predictors disagree: the label says whether the expert was right there.

mod forest;
mod loss;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cd::{CdError, CdMethod, Direction};
use crate::data::{CausalPair, Domain};
use crate::experts::{Expert, ExpertError};
use crate::features::{FeatureError, FeatureVector, FeaturizerConfig, FittedFeaturizer};
use crate::rng::{keyed_rng, Stream};
use crate::scalar::Real;

pub use forest::{fit_forest, Forest, ForestHyperparams, MaxFeatures, Node, Tree};
pub use loss::{deferral_loss, surrogate_loss, SOFT_SCORE_CLIP};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DeferError {
    #[error("prediction maps have different keys")]
    KeyMismatch,
    #[error("length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 training rows, got {0}")]
    EmptyTraining(usize),
    #[error("the two predictors agree on every training pair")]
    EmptyS,
    #[error("invalid forest hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("pair {id}: {source}")]
    Cd { id: u32, source: CdError },
    #[error(transparent)]
    Expert(#[from] ExpertError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Ids where the two predictors differ.
pub fn disagreement_set(
    cd_preds: &BTreeMap<u32, Direction>,
    expert_preds: &BTreeMap<u32, Direction>,
) -> Result<BTreeSet<u32>, DeferError> {
    if !cd_preds.keys().eq(expert_preds.keys()) {
        return Err(DeferError::KeyMismatch);
    }
    Ok(cd_preds
        .iter()
        .zip(expert_preds.values())
        .filter(|((_, a), b)| a != b)
        .map(|((id, _), _)| *id)
        .collect())
}

/// `true` where the expert is right, for ids in `s` only.
pub fn reduction_labels(
    s: &BTreeSet<u32>,
    expert_preds: &BTreeMap<u32, Direction>,
    truths: &BTreeMap<u32, Direction>,
) -> Result<BTreeMap<u32, bool>, DeferError> {
    s.iter()
        .map(|id| match (expert_preds.get(id), truths.get(id)) {
            (Some(e), Some(t)) => Ok((*id, e == t)),
            _ => Err(DeferError::KeyMismatch),
        })
        .collect()
}

/// Everything training needs to know about one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeferralInstance {
    pub id: u32,
    pub description: String,
    pub domain: Domain,
    pub cd_pred: Direction,
    pub expert_pred: Direction,
    pub truth: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DeferralRow<T: Real> {
    pub pair_id: u32,
    pub features: FeatureVector<T>,
    pub y_prime: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DeferralTrainingSet<T: Real> {
    pub rows: Vec<DeferralRow<T>>,
    pub s_indices: BTreeSet<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", tag = "type", rename_all = "snake_case")]
pub enum DeferralRule<T: Real> {
    Forest(Forest<T>),
    /// Used when the predictors never disagree during training.
    AlwaysCd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DeferralModel<T: Real = f64> {
    pub format_version: u32,
    pub featurizer: FittedFeaturizer,
    pub hp: ForestHyperparams,
    pub s_size: usize,
    pub baseline_p: f64,
    pub rule: DeferralRule<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeferralDecision {
    pub chose_expert: bool,
    pub prediction: Direction,
    pub soft_score: f64,
}

/// Featurizes the disagreement set.
pub fn build_training_set<T: Real>(
    instances: &[DeferralInstance],
    featurizer: &FittedFeaturizer,
) -> Result<DeferralTrainingSet<T>, DeferError> {
    let cd: BTreeMap<u32, Direction> = instances.iter().map(|i| (i.id, i.cd_pred)).collect();
    let ex: BTreeMap<u32, Direction> = instances.iter().map(|i| (i.id, i.expert_pred)).collect();
    let truth: BTreeMap<u32, Direction> = instances.iter().map(|i| (i.id, i.truth)).collect();
    if cd.len() != instances.len() {
        return Err(DeferError::KeyMismatch);
    }
    let s = disagreement_set(&cd, &ex)?;
    let labels = reduction_labels(&s, &ex, &truth)?;
    let rows = instances
        .iter()
        .filter(|i| s.contains(&i.id))
        .map(|i| {
            Ok(DeferralRow {
                pair_id: i.id,
                features: featurizer.featurize(&i.description)?,
                y_prime: labels[&i.id],
            })
        })
        .collect::<Result<Vec<_>, DeferError>>()?;
    Ok(DeferralTrainingSet { rows, s_indices: s })
}

/// Fits the deferral function from precomputed predictions. The featurizer
/// is fitted on every training description.
pub fn train_from_instances<T: Real>(
    instances: &[DeferralInstance],
    featurizer: &FeaturizerConfig,
    hp: &ForestHyperparams,
) -> Result<DeferralModel<T>, DeferError> {
    hp.validate()?;
    let corpus: Vec<&str> = instances.iter().map(|i| i.description.as_str()).collect();
    let fitted = FittedFeaturizer::fit(featurizer, &corpus)?;
    let set: DeferralTrainingSet<T> = build_training_set(instances, &fitted)?;
    if set.rows.is_empty() {
        return Err(DeferError::EmptyS);
    }
    let expert_right = set.rows.iter().filter(|r| r.y_prime).count();
    let baseline_p = expert_right as f64 / set.rows.len() as f64;
    let rule = if set.rows.len() == 1 {
        // one row cannot be bootstrapped into a split; its label decides
        DeferralRule::Forest(Forest {
            n_features: fitted.dim(),
            trees: vec![Tree {
                nodes: vec![Node::Leaf {
                    counts: if set.rows[0].y_prime { [0, 1] } else { [1, 0] },
                }],
            }],
        })
    } else {
        let x: Vec<Vec<T>> = set.rows.iter().map(|r| r.features.values.clone()).collect();
        let y: Vec<bool> = set.rows.iter().map(|r| r.y_prime).collect();
        DeferralRule::Forest(fit_forest(&x, &y, hp)?)
    };
    Ok(DeferralModel {
        format_version: MODEL_FORMAT_VERSION,
        featurizer: fitted,
        hp: *hp,
        s_size: set.rows.len(),
        baseline_p,
        rule,
    })
}

/// Like [`train_from_instances`] but returns an always-CD model when the
/// predictors never disagree.
pub fn train_or_fallback<T: Real>(
    instances: &[DeferralInstance],
    featurizer: &FeaturizerConfig,
    hp: &ForestHyperparams,
) -> Result<DeferralModel<T>, DeferError> {
    match train_from_instances(instances, featurizer, hp) {
        Err(DeferError::EmptyS) => {
            let corpus: Vec<&str> = instances.iter().map(|i| i.description.as_str()).collect();
            Ok(DeferralModel {
                format_version: MODEL_FORMAT_VERSION,
                featurizer: FittedFeaturizer::fit(featurizer, &corpus)?,
                hp: *hp,
                s_size: 0,
                baseline_p: 0.0,
                rule: DeferralRule::AlwaysCd,
            })
        }
        other => other,
    }
}

/// Runs both predictors over the pairs.
pub fn collect_instances<T: Real>(
    pairs: &[CausalPair<T>],
    cd_method: &CdMethod,
    expert: &Expert,
) -> Result<Vec<DeferralInstance>, DeferError> {
    pairs
        .iter()
        .map(|p| {
            let cd = cd_method
                .score(&p.x_u, &p.x_v)
                .map_err(|source| DeferError::Cd { id: p.id, source })?;
            let ex = expert.predict(p)?;
            Ok(DeferralInstance {
                id: p.id,
                description: p.description.clone(),
                domain: p.domain,
                cd_pred: cd.direction,
                expert_pred: ex.direction,
                truth: p.truth,
            })
        })
        .collect()
}

pub fn train_deferral<T: Real>(
    pairs: &[CausalPair<T>],
    cd_method: &CdMethod,
    expert: &Expert,
    featurizer: &FeaturizerConfig,
    hp: &ForestHyperparams,
) -> Result<DeferralModel<T>, DeferError> {
    let instances = collect_instances(pairs, cd_method, expert)?;
    train_from_instances(&instances, featurizer, hp)
}

/// Chooses the expert iff at least half the trees vote that it is right.
pub fn defer_predict<T: Real>(
    model: &DeferralModel<T>,
    features: &FeatureVector<T>,
    cd_pred: Direction,
    expert_pred: Direction,
) -> DeferralDecision {
    let soft_score = match &model.rule {
        DeferralRule::Forest(f) => f.soft_score(&features.values),
        DeferralRule::AlwaysCd => 0.0,
    };
    let chose_expert = soft_score >= 0.5;
    DeferralDecision {
        chose_expert,
        prediction: if chose_expert { expert_pred } else { cd_pred },
        soft_score,
    }
}

impl<T: Real> DeferralModel<T> {
    /// Fraction of trees voting that the expert is right on this text.
    pub fn expert_score(&self, description: &str) -> Result<f64, DeferError> {
        match &self.rule {
            DeferralRule::AlwaysCd => Ok(0.0),
            DeferralRule::Forest(f) => {
                let x: FeatureVector<T> = self.featurizer.featurize(description)?;
                Ok(f.soft_score(&x.values))
            }
        }
    }

    pub fn decide(
        &self,
        description: &str,
        cd_pred: Direction,
        expert_pred: Direction,
    ) -> Result<DeferralDecision, DeferError> {
        if let DeferralRule::AlwaysCd = self.rule {
            return Ok(DeferralDecision {
                chose_expert: false,
                prediction: cd_pred,
                soft_score: 0.0,
            });
        }
        let f = self.featurizer.featurize(description)?;
        Ok(defer_predict(self, &f, cd_pred, expert_pred))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, DeferError> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        let version = v.get("format_version").and_then(|x| x.as_u64()).unwrap_or(0) as u32;
        if version != MODEL_FORMAT_VERSION {
            return Err(DeferError::UnsupportedVersion(version));
        }
        Ok(serde_json::from_value(v)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineDecision {
    pub chose_expert: bool,
    pub prediction: Direction,
}

/// Defers to the expert with probability `baseline_p`, drawn from a stream
/// keyed by `(seed, pair_id)`.
pub fn baseline_predict(
    baseline_p: f64,
    cd_pred: Direction,
    expert_pred: Direction,
    seed: u64,
    pair_id: u32,
) -> Result<BaselineDecision, DeferError> {
    if !(0.0..=1.0).contains(&baseline_p) {
        return Err(DeferError::InvalidProbability(baseline_p));
    }
    let mut rng = keyed_rng(seed, Stream::Baseline, u64::from(pair_id));
    let chose_expert = rng.random::<f64>() < baseline_p;
    Ok(BaselineDecision {
        chose_expert,
        prediction: if chose_expert { expert_pred } else { cd_pred },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Direction::{Backward as B, Forward as F};

    fn map(v: &[(u32, Direction)]) -> BTreeMap<u32, Direction> {
        v.iter().copied().collect()
    }

    #[test]
    fn disagreement_examples() {
        let cd = map(&[(1, F), (2, F), (3, B)]);
        let ex = map(&[(1, F), (2, B), (3, B)]);
        assert_eq!(disagreement_set(&cd, &ex).unwrap(), BTreeSet::from([2]));
        assert!(disagreement_set(&cd, &cd).unwrap().is_empty());
        let short = map(&[(1, F), (2, B)]);
        assert!(matches!(disagreement_set(&cd, &short), Err(DeferError::KeyMismatch)));
    }

    #[test]
    fn labels_follow_expert_correctness() {
        let ex = map(&[(1, F), (2, B)]);
        let truth = map(&[(1, F), (2, F)]);
        let y = reduction_labels(&BTreeSet::from([1, 2]), &ex, &truth).unwrap();
        assert_eq!(y, BTreeMap::from([(1, true), (2, false)]));
        assert!(reduction_labels(&BTreeSet::from([9]), &ex, &truth).is_err());
    }

    fn instances() -> Vec<DeferralInstance> {
        let words = ["rain", "wage", "cell", "dose", "mass"];
        (0..40u32)
            .map(|i| {
                let truth = if i % 3 == 0 { B } else { F };
                let expert_right = i % 5 < 3;
                let cd_right = i % 2 == 0;
                DeferralInstance {
                    id: i,
                    description: format!("{} study {}", words[(i % 5) as usize], i % 7),
                    domain: Domain::ALL[(i % 5) as usize],
                    cd_pred: if cd_right { truth } else { truth.flip() },
                    expert_pred: if expert_right { truth } else { truth.flip() },
                    truth,
                }
            })
            .collect()
    }

    #[test]
    fn training_is_deterministic_and_round_trips() {
        let inst = instances();
        let cfg = FeaturizerConfig::hashed_tfidf(16);
        let hp = ForestHyperparams::default();
        let a: DeferralModel = train_from_instances(&inst, &cfg, &hp).unwrap();
        let b: DeferralModel = train_from_instances(&inst, &cfg, &hp).unwrap();
        assert_eq!(a, b);
        let s = inst.iter().filter(|i| i.cd_pred != i.expert_pred).count();
        assert_eq!(a.s_size, s);
        let right = inst
            .iter()
            .filter(|i| i.cd_pred != i.expert_pred && i.expert_pred == i.truth)
            .count();
        assert_eq!(a.baseline_p, right as f64 / s as f64);
        let back = DeferralModel::<f64>::from_json(&a.to_json()).unwrap();
        assert_eq!(a, back);
        let bumped = a.to_json().replace("\"format_version\": 1", "\"format_version\": 7");
        assert!(matches!(
            DeferralModel::<f64>::from_json(&bumped),
            Err(DeferError::UnsupportedVersion(7))
        ));
    }

    #[test]
    fn identical_predictors_give_empty_s() {
        let mut inst = instances();
        for i in &mut inst {
            i.expert_pred = i.cd_pred;
        }
        let cfg = FeaturizerConfig::hashed_tfidf(16);
        let hp = ForestHyperparams::default();
        assert!(matches!(
            train_from_instances::<f64>(&inst, &cfg, &hp),
            Err(DeferError::EmptyS)
        ));
        let m: DeferralModel = train_or_fallback(&inst, &cfg, &hp).unwrap();
        assert_eq!(m.rule, DeferralRule::AlwaysCd);
        let d = m.decide("rain study", F, B).unwrap();
        assert!(!d.chose_expert);
        assert_eq!(d.prediction, F);
    }

    fn constant_model(score_one: bool) -> DeferralModel<f64> {
        DeferralModel {
            format_version: MODEL_FORMAT_VERSION,
            featurizer: FittedFeaturizer::fit(&FeaturizerConfig::hashed_tfidf(4), &["a"]).unwrap(),
            hp: ForestHyperparams::default(),
            s_size: 2,
            baseline_p: 0.5,
            rule: DeferralRule::Forest(Forest {
                n_features: 4,
                trees: vec![
                    Tree {
                        nodes: vec![Node::Leaf { counts: [0, 3] }],
                    },
                    Tree {
                        nodes: vec![Node::Leaf {
                            counts: if score_one { [0, 1] } else { [2, 0] },
                        }],
                    },
                ],
            }),
        }
    }

    #[test]
    fn tie_and_agreement_rules() {
        let fv = FeatureVector {
            values: vec![0.5; 4],
        };
        let half = constant_model(false);
        let d = defer_predict(&half, &fv, F, B);
        assert_eq!(d.soft_score, 0.5);
        assert!(d.chose_expert);
        assert_eq!(d.prediction, B);
        let one = constant_model(true);
        for (c, e) in [(F, F), (F, B), (B, F), (B, B)] {
            let d = defer_predict(&one, &fv, c, e);
            assert_eq!(d.prediction, e);
            if c == e {
                assert_eq!(defer_predict(&half, &fv, c, e).prediction, c);
            }
        }
    }

    #[test]
    fn baseline_extremes_and_validation() {
        for id in 0..100 {
            assert_eq!(baseline_predict(1.0, F, B, 3, id).unwrap().prediction, B);
            assert_eq!(baseline_predict(0.0, F, B, 3, id).unwrap().prediction, F);
        }
        assert!(baseline_predict(1.2, F, B, 0, 0).is_err());
    }

    #[test]
    fn baseline_rate_concentrates() {
        let n = 10_000u32;
        let hits = (0..n)
            .filter(|&id| baseline_predict(0.6, F, B, 11, id).unwrap().chose_expert)
            .count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.6).abs() <= 0.015, "{rate}");
    }
}
