//! CART random forest for binary labels.
//!
//! Each tree is grown on a bootstrap resample with Gini splits over a random
//! subset of features per node. Nodes are stored flat with child indices.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DeferError;
use crate::rng::{keyed_rng, Stream};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
}

impl MaxFeatures {
    pub fn count(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().ceil() as usize).clamp(1, d.max(1)),
            MaxFeatures::All => d.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestHyperparams {
    pub n_trees: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for ForestHyperparams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            min_samples_split: 5,
            max_features: MaxFeatures::Sqrt,
            seed: 0,
        }
    }
}

impl ForestHyperparams {
    pub fn validate(&self) -> Result<(), DeferError> {
        if self.n_trees == 0 {
            return Err(DeferError::InvalidHyperparams("n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(DeferError::InvalidHyperparams("min_samples_split must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", untagged)]
pub enum Node<T: Real> {
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    /// Bootstrap counts of label 0 and label 1.
    Leaf { counts: [usize; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Tree<T: Real> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Real> Tree<T> {
    /// Majority class of the reached leaf; a tied leaf votes 1.
    pub fn vote(&self, x: &[T]) -> bool {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts[1] >= counts[0],
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go<T: Real>(t: &Tree<T>, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Forest<T: Real> {
    pub n_features: usize,
    pub trees: Vec<Tree<T>>,
}

impl<T: Real> Forest<T> {
    /// Fraction of trees voting for label 1.
    pub fn soft_score(&self, x: &[T]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.vote(x)).count();
        votes as f64 / self.trees.len() as f64
    }
}

pub fn fit_forest<T: Real>(
    features: &[Vec<T>],
    labels: &[bool],
    hp: &ForestHyperparams,
) -> Result<Forest<T>, DeferError> {
    hp.validate()?;
    if features.len() != labels.len() {
        return Err(DeferError::LengthMismatch(features.len(), labels.len()));
    }
    if features.len() < 2 {
        return Err(DeferError::EmptyTraining(features.len()));
    }
    let d = features[0].len();
    if d == 0 || features.iter().any(|r| r.len() != d) {
        return Err(DeferError::InvalidHyperparams("feature rows must share a positive dimension".into()));
    }
    let n = features.len();
    let trees = (0..hp.n_trees)
        .map(|t| {
            let mut rng = keyed_rng(hp.seed, Stream::Forest, t as u64);
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut builder = Builder {
                x: features,
                y: labels,
                min_split: hp.min_samples_split,
                mtry: hp.max_features.count(d),
                nodes: Vec::new(),
                rng,
            };
            builder.grow(sample);
            Tree { nodes: builder.nodes }
        })
        .collect();
    Ok(Forest { n_features: d, trees })
}

struct Builder<'a, T: Real, R: Rng> {
    x: &'a [Vec<T>],
    y: &'a [bool],
    min_split: usize,
    mtry: usize,
    nodes: Vec<Node<T>>,
    rng: R,
}

struct SplitChoice<T> {
    feature: usize,
    threshold: T,
    impurity: f64,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

impl<T: Real, R: Rng> Builder<'_, T, R> {
    fn grow(&mut self, sample: Vec<usize>) -> usize {
        let pos = sample.iter().filter(|&&i| self.y[i]).count();
        let counts = [sample.len() - pos, pos];
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        if sample.len() < self.min_split || pos == 0 || pos == sample.len() {
            return id;
        }
        let Some(best) = self.best_split(&sample, pos) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = sample
            .iter()
            .partition(|&&i| self.x[i][best.feature] <= best.threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Visits features in random order until `mtry` non-constant ones have
    /// been examined (or all are exhausted).
    fn best_split(&mut self, sample: &[usize], pos: usize) -> Option<SplitChoice<T>> {
        let d = self.x[0].len();
        let mut order: Vec<usize> = (0..d).collect();
        order.shuffle(&mut self.rng);
        let n = sample.len();
        let mut best: Option<SplitChoice<T>> = None;
        let mut examined = 0;
        let mut vals: Vec<(T, bool)> = Vec::with_capacity(n);
        for f in order {
            if examined >= self.mtry {
                break;
            }
            vals.clear();
            vals.extend(sample.iter().map(|&i| (self.x[i][f], self.y[i])));
            vals.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            if vals[0].0 == vals[n - 1].0 {
                continue;
            }
            examined += 1;
            let mut left_pos = 0;
            for k in 1..n {
                if vals[k - 1].1 {
                    left_pos += 1;
                }
                let (a, b) = (vals[k - 1].0, vals[k].0);
                if a == b {
                    continue;
                }
                let impurity = (k as f64 * gini(left_pos, k)
                    + (n - k) as f64 * gini(pos - left_pos, n - k))
                    / n as f64;
                if best.as_ref().is_none_or(|s| impurity < s.impurity) {
                    let mut threshold = a + (b - a) / T::lit(2.0);
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(SplitChoice {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(seed: u64) -> ForestHyperparams {
        ForestHyperparams {
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn single_class_is_constant() {
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]];
        let f = fit_forest(&x, &[true, true, true], &hp(0)).unwrap();
        assert_eq!(f.soft_score(&[5.0, -3.0]), 1.0);
        let f = fit_forest(&x, &[false, false, false], &hp(0)).unwrap();
        assert_eq!(f.soft_score(&[5.0, -3.0]), 0.0);
    }

    #[test]
    fn too_few_rows_or_bad_hp() {
        assert!(matches!(
            fit_forest(&[vec![0.0f64]], &[true], &hp(0)),
            Err(DeferError::EmptyTraining(1))
        ));
        let bad = ForestHyperparams {
            n_trees: 0,
            ..hp(0)
        };
        assert!(fit_forest(&[vec![0.0f64], vec![1.0]], &[true, false], &bad).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i * 7 % 11) as f64, (i % 5) as f64]).collect();
        let y: Vec<bool> = (0..30).map(|i| (i * 3) % 4 == 0).collect();
        let a = fit_forest(&x, &y, &hp(3)).unwrap();
        let b = fit_forest(&x, &y, &hp(3)).unwrap();
        assert_eq!(a, b);
        let c = fit_forest(&x, &y, &hp(4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mtry_rule() {
        assert_eq!(MaxFeatures::Sqrt.count(50), 8);
        assert_eq!(MaxFeatures::Sqrt.count(2), 2);
        assert_eq!(MaxFeatures::Sqrt.count(16), 4);
        assert_eq!(MaxFeatures::All.count(7), 7);
    }

    #[test]
    fn thresholds_are_midpoints() {
        let x = vec![vec![0.0], vec![1.0], vec![3.0], vec![4.0]];
        let y = [false, false, true, true];
        let f = fit_forest(
            &x,
            &y,
            &ForestHyperparams {
                n_trees: 20,
                min_samples_split: 2,
                max_features: MaxFeatures::All,
                seed: 0,
            },
        )
        .unwrap();
        let allowed = [0.5, 1.5, 2.0, 2.5, 3.5];
        let mut saw_split = false;
        for t in &f.trees {
            for node in &t.nodes {
                if let Node::Split { threshold, .. } = node {
                    saw_split = true;
                    assert!(allowed.contains(threshold), "{threshold}");
                }
            }
        }
        assert!(saw_split);
        assert!(f.soft_score(&[0.0]) < 0.5);
        assert!(f.soft_score(&[4.0]) > 0.5);
    }
}
