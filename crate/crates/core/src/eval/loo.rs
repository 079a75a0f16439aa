use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{instances, EvalError};
use crate::cd::Direction;
use crate::data::CausalPair;
use crate::defer::{train_or_fallback, ForestHyperparams, MaxFeatures};
use crate::experts::{Expert, ExpertKind};
use crate::features::{FeaturizerConfig, DIM_GRID};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n_trees: usize,
    pub min_samples_split: usize,
    pub dim: usize,
}

impl GridPoint {
    pub fn hyperparams(&self, seed: u64) -> ForestHyperparams {
        ForestHyperparams {
            n_trees: self.n_trees,
            min_samples_split: self.min_samples_split,
            max_features: MaxFeatures::Sqrt,
            seed,
        }
    }
}

/// Trees in {10, 50, 100}, split sizes in {2, 5}, embedding sizes in
/// {5, 10, 15, 20, 50}: 30 points, last index varying fastest.
pub fn paper_grid() -> Vec<GridPoint> {
    let mut out = Vec::with_capacity(30);
    for n_trees in [10, 50, 100] {
        for min_samples_split in [2, 5] {
            for dim in DIM_GRID {
                out.push(GridPoint {
                    n_trees,
                    min_samples_split,
                    dim,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooSelection {
    pub best_index: usize,
    pub best: GridPoint,
    pub scores: Vec<f64>,
}

/// Leave-one-out deferral loss for every grid point. Losses are averaged per
/// (expert, CD, seed), then per expert kind, then across kinds; the lowest
/// score wins and ties go to the earlier grid point.
pub fn loo_select<T: Real>(
    train: &[CausalPair<T>],
    grid: &[GridPoint],
    experts: &[Expert],
    cd: &[(String, BTreeMap<u32, Direction>)],
    seeds: &[u64],
    featurizer: &FeaturizerConfig,
) -> Result<LooSelection, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if experts.is_empty() || cd.is_empty() || seeds.is_empty() || train.len() < 2 {
        return Err(EvalError::Empty);
    }
    // instances do not depend on the grid point
    let mut cells: Vec<(ExpertKind, Vec<crate::defer::DeferralInstance>, u64)> = Vec::new();
    for e in experts {
        for &seed in seeds {
            let reseeded = e.reseeded(seed);
            for (_, preds) in cd {
                cells.push((e.kind(), instances(train, preds, &reseeded)?, seed));
            }
        }
    }
    let mut scores = Vec::with_capacity(grid.len());
    for g in grid {
        let fcfg = featurizer.with_dim(g.dim);
        let mut by_kind: BTreeMap<ExpertKind, Vec<f64>> = BTreeMap::new();
        for (kind, inst, seed) in &cells {
            let hp = g.hyperparams(*seed);
            let mut wrong = 0usize;
            for i in 0..inst.len() {
                let mut rest = inst.clone();
                let held = rest.remove(i);
                let model = train_or_fallback::<T>(&rest, &fcfg, &hp)?;
                let d = model.decide(&held.description, held.cd_pred, held.expert_pred)?;
                if d.prediction != held.truth {
                    wrong += 1;
                }
            }
            by_kind
                .entry(*kind)
                .or_default()
                .push(wrong as f64 / inst.len() as f64);
        }
        let kind_means: Vec<f64> = by_kind
            .values()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect();
        scores.push(kind_means.iter().sum::<f64>() / kind_means.len() as f64);
    }
    let mut best_index = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best_index] {
            best_index = i;
        }
    }
    Ok(LooSelection {
        best_index,
        best: grid[best_index],
        scores,
    })
}
