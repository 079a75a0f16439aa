//! From pairwise deferral to orderings over many variables.
//!
//! A labelled graph is flattened into one training row per node pair, labelled
//! by ancestry (the transitive closure of the edges, not the edges alone).
//! At inference every pair is queried through the deferral model, pairs
//! without ancestry are discarded, and the remaining comparisons are
//! aggregated by Borda count.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::defer::{fit_forest, DeferError, DeferralModel, DeferralRule, ForestHyperparams, MODEL_FORMAT_VERSION};
use crate::features::{FeatureError, FeaturizerConfig, FittedFeaturizer};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph contains a cycle")]
    CyclicGraph,
    #[error("edge references unknown node {0:?}")]
    UnknownNode(String),
    #[error("duplicate node {0:?}")]
    DuplicateNode(String),
    #[error("data columns must cover every node with equal lengths")]
    RaggedData,
    #[error("no comparisons to aggregate")]
    NoComparisons,
    #[error("need at least 2 nodes")]
    TooFewNodes,
    #[error("empty input")]
    Empty,
    #[error("length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Defer(#[from] DeferError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LabeledGraph<T: Real = f64> {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub context: String,
    #[serde(default)]
    pub data: BTreeMap<String, Vec<T>>,
}

impl<T: Real> LabeledGraph<T> {
    /// Checks names and data; acyclicity is checked by [`ancestry_matrix`].
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(n.as_str()) {
                return Err(GraphError::DuplicateNode(n.clone()));
            }
        }
        for (u, v) in &self.edges {
            for n in [u, v] {
                if !seen.contains(n.as_str()) {
                    return Err(GraphError::UnknownNode(n.clone()));
                }
            }
        }
        if !self.data.is_empty() {
            let len = self.data.values().next().map(Vec::len);
            let covers = self.nodes.iter().all(|n| self.data.contains_key(n)) && self.data.len() == self.nodes.len();
            if !covers || self.data.values().any(|c| Some(c.len()) != len) {
                return Err(GraphError::RaggedData);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ancestry {
    /// The first node is an ancestor of the second.
    Forward,
    Backward,
    NoAncestry,
}

impl Ancestry {
    pub fn sigma(self) -> i8 {
        match self {
            Ancestry::Forward => 1,
            Ancestry::Backward => -1,
            Ancestry::NoAncestry => 0,
        }
    }

    pub fn from_sigma(s: i8) -> Ancestry {
        match s.signum() {
            1 => Ancestry::Forward,
            -1 => Ancestry::Backward,
            _ => Ancestry::NoAncestry,
        }
    }

    pub fn flip(self) -> Ancestry {
        Ancestry::from_sigma(-self.sigma())
    }
}

/// `sigma[i][j]` is 1 when node `i` is an ancestor of node `j`, -1 for the
/// reverse and 0 otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AncestryMatrix {
    pub nodes: Vec<String>,
    pub sigma: Vec<Vec<i8>>,
}

impl AncestryMatrix {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn get(&self, u: &str, v: &str) -> Option<i8> {
        Some(self.sigma[self.index(u)?][self.index(v)?])
    }
}

pub fn ancestry_matrix<T: Real>(g: &LabeledGraph<T>) -> Result<AncestryMatrix, GraphError> {
    g.validate()?;
    let n = g.nodes.len();
    let idx: BTreeMap<&str, usize> = g.nodes.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut children: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (u, v) in &g.edges {
        children[idx[u.as_str()]].insert(idx[v.as_str()]);
    }
    // Kahn's algorithm gives a topological order or detects a cycle
    let mut indeg = vec![0usize; n];
    for c in &children {
        for &j in c {
            indeg[j] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for &j in &children[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    if order.len() != n {
        return Err(GraphError::CyclicGraph);
    }
    // descendants, filled in reverse topological order
    let mut desc: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &i in order.iter().rev() {
        let mut d = BTreeSet::new();
        for &j in &children[i] {
            d.insert(j);
            d.extend(desc[j].iter().copied());
        }
        desc[i] = d;
    }
    let mut sigma = vec![vec![0i8; n]; n];
    for i in 0..n {
        for &j in &desc[i] {
            sigma[i][j] = 1;
            sigma[j][i] = -1;
        }
    }
    Ok(AncestryMatrix {
        nodes: g.nodes.clone(),
        sigma,
    })
}

/// Text the deferral model sees for the pair `(u, v)`.
pub fn pair_description(context: &str, u: &str, v: &str) -> String {
    format!("{context} The first variable is {u} and the second variable is {v}.")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GraphRow<T: Real = f64> {
    pub graph_index: usize,
    pub u: String,
    pub v: String,
    pub description: String,
    pub x_u: Vec<T>,
    pub x_v: Vec<T>,
    pub label: Ancestry,
}

impl<T: Real> GraphRow<T> {
    pub fn no_ancestry(&self) -> bool {
        self.label == Ancestry::NoAncestry
    }
}

/// One row per unordered node pair `(nodes[i], nodes[j])`, `i < j`.
pub fn flatten_training<T: Real>(graphs: &[LabeledGraph<T>]) -> Result<Vec<GraphRow<T>>, GraphError> {
    if graphs.is_empty() {
        return Err(GraphError::Empty);
    }
    let mut rows = Vec::new();
    for (gi, g) in graphs.iter().enumerate() {
        let m = ancestry_matrix(g)?;
        for i in 0..g.nodes.len() {
            for j in i + 1..g.nodes.len() {
                let (u, v) = (&g.nodes[i], &g.nodes[j]);
                rows.push(GraphRow {
                    graph_index: gi,
                    u: u.clone(),
                    v: v.clone(),
                    description: pair_description(&g.context, u, v),
                    x_u: g.data.get(u).cloned().unwrap_or_default(),
                    x_v: g.data.get(v).cloned().unwrap_or_default(),
                    label: Ancestry::from_sigma(m.sigma[i][j]),
                });
            }
        }
    }
    Ok(rows)
}

/// Fits the binary deferral classifier on rows where the two predictors
/// disagree; the label is whether the expert matches the true ancestry.
pub fn train_graph_deferral<T: Real>(
    rows: &[GraphRow<T>],
    cd_preds: &[Ancestry],
    expert_preds: &[Ancestry],
    featurizer: &FeaturizerConfig,
    hp: &ForestHyperparams,
) -> Result<DeferralModel<T>, GraphError> {
    for len in [cd_preds.len(), expert_preds.len()] {
        if len != rows.len() {
            return Err(GraphError::LengthMismatch(rows.len(), len));
        }
    }
    let corpus: Vec<&str> = rows.iter().map(|r| r.description.as_str()).collect();
    let fitted = FittedFeaturizer::fit(featurizer, &corpus)?;
    let s: Vec<usize> = (0..rows.len()).filter(|&i| cd_preds[i] != expert_preds[i]).collect();
    let labels: Vec<bool> = s.iter().map(|&i| expert_preds[i] == rows[i].label).collect();
    let rule = if s.len() < 2 {
        if s.is_empty() {
            DeferralRule::AlwaysCd
        } else {
            DeferralRule::Forest(crate::defer::Forest {
                n_features: fitted.dim(),
                trees: vec![crate::defer::Tree {
                    nodes: vec![crate::defer::Node::Leaf {
                        counts: if labels[0] { [0, 1] } else { [1, 0] },
                    }],
                }],
            })
        }
    } else {
        let x = s
            .iter()
            .map(|&i| Ok(fitted.featurize::<T>(&rows[i].description)?.values))
            .collect::<Result<Vec<_>, GraphError>>()?;
        DeferralRule::Forest(fit_forest(&x, &labels, hp)?)
    };
    let right = labels.iter().filter(|&&l| l).count();
    Ok(DeferralModel {
        format_version: MODEL_FORMAT_VERSION,
        featurizer: fitted,
        hp: *hp,
        s_size: s.len(),
        baseline_p: if s.is_empty() { 0.0 } else { right as f64 / s.len() as f64 },
        rule,
    })
}

/// Nodes in rank order; `pi(name)` is the 1-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ranking {
    pub order: Vec<String>,
}

impl Ranking {
    pub fn pi(&self, name: &str) -> Option<usize> {
        self.order.iter().position(|n| n == name).map(|p| p + 1)
    }

    /// Fraction of nonzero entries of `m` whose order the ranking contradicts.
    pub fn violation_rate(&self, m: &AncestryMatrix) -> f64 {
        let mut total = 0usize;
        let mut bad = 0usize;
        for i in 0..m.nodes.len() {
            for j in 0..m.nodes.len() {
                if m.sigma[i][j] == 1 {
                    total += 1;
                    if self.pi(&m.nodes[i]) > self.pi(&m.nodes[j]) {
                        bad += 1;
                    }
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            bad as f64 / total as f64
        }
    }
}

/// Borda aggregation: score is wins minus losses, ranked by descending
/// score with ties broken by name. Outcome `1` means `u` comes before `v`.
pub fn aggregate_ranking(comparisons: &[(String, String, i8)]) -> Result<Ranking, GraphError> {
    if comparisons.is_empty() {
        return Err(GraphError::NoComparisons);
    }
    let mut score: BTreeMap<&str, i64> = BTreeMap::new();
    for (u, v, o) in comparisons {
        let o = i64::from(o.signum());
        *score.entry(u).or_default() += o;
        *score.entry(v).or_default() -= o;
    }
    let mut order: Vec<(&str, i64)> = score.into_iter().collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Ok(Ranking {
        order: order.into_iter().map(|(n, _)| n.to_string()).collect(),
    })
}

/// Predicts the ancestry between two named nodes of a graph.
pub trait AncestryOracle<T: Real> {
    fn ancestry(&self, g: &LabeledGraph<T>, u: &str, v: &str) -> Ancestry;
}

impl<T: Real, F: Fn(&LabeledGraph<T>, &str, &str) -> Ancestry> AncestryOracle<T> for F {
    fn ancestry(&self, g: &LabeledGraph<T>, u: &str, v: &str) -> Ancestry {
        self(g, u, v)
    }
}

/// Queries every pair through the deferral model, drops pairs predicted to
/// have no ancestry, and aggregates the rest. Nodes never mentioned by a
/// kept comparison are appended in name order, so the result always ranks
/// every node.
pub fn infer_order<T: Real>(
    g: &LabeledGraph<T>,
    model: &DeferralModel<T>,
    cd: &impl AncestryOracle<T>,
    expert: &impl AncestryOracle<T>,
) -> Result<Ranking, GraphError> {
    if g.nodes.len() < 2 {
        return Err(GraphError::TooFewNodes);
    }
    g.validate()?;
    let mut comparisons = Vec::new();
    for i in 0..g.nodes.len() {
        for j in i + 1..g.nodes.len() {
            let (u, v) = (&g.nodes[i], &g.nodes[j]);
            let c = cd.ancestry(g, u, v);
            let e = expert.ancestry(g, u, v);
            let chosen = if c == e || model.expert_score(&pair_description(&g.context, u, v))? < 0.5 {
                c
            } else {
                e
            };
            if chosen != Ancestry::NoAncestry {
                comparisons.push((u.clone(), v.clone(), chosen.sigma()));
            }
        }
    }
    let mut ranking = aggregate_ranking(&comparisons)?;
    let mut missing: Vec<&String> = g.nodes.iter().filter(|n| ranking.pi(n).is_none()).collect();
    missing.sort();
    ranking.order.extend(missing.into_iter().cloned());
    Ok(ranking)
}
