//! Declarative run configuration, read from one JSON file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use l2dcd::data::{
    generate_synthetic, pairs_from_json, split_table, stratified_split, CausalPair, PairLoader, Split,
    SyntheticBenchSpec,
};
use l2dcd::eval::{cd_predictions, stub_cd_predictions, GridPoint, Weighting};
use l2dcd::experts::{all_p_experts, make_epsilon_expert, p_expert_from_name, RemoteExpert, RemoteExpertConfig};
use l2dcd::features::{FeaturizerConfig, DEFAULT_DIM};
use l2dcd::graphext::{Ancestry, LabeledGraph};
use l2dcd::{CdMethod, Direction, Expert, ForestHyperparams};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticBenchSpec),
    /// The real benchmark, split as in the built-in split table.
    Tuebingen {
        root: PathBuf,
        #[serde(default)]
        overlay: Option<PathBuf>,
    },
    /// A JSON array of pairs, split by domain.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpertEntry {
    Epsilon {
        epsilon: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Three good domains by initials, e.g. `"BCE"`.
    P { domains: String },
    AllP,
    Remote(RemoteExpertConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubTag {
    Stub,
}

/// A simulated CD method that is right on each pair with fixed probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdStub {
    pub method: StubTag,
    pub accuracy: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CdEntry {
    Stub(CdStub),
    Method(CdMethod),
}

impl CdEntry {
    pub fn name(&self) -> String {
        match self {
            CdEntry::Stub(s) => format!("stub({})", s.accuracy),
            CdEntry::Method(m) => m.name().to_string(),
        }
    }

    pub fn predictions(&self, pairs: &[CausalPair]) -> Result<BTreeMap<u32, Direction>, CliError> {
        match self {
            CdEntry::Stub(s) => {
                if !(0.0..=1.0).contains(&s.accuracy) {
                    return Err(CliError::Usage(format!("stub accuracy {} outside [0, 1]", s.accuracy)));
                }
                Ok(stub_cd_predictions(pairs, s.accuracy, s.seed))
            }
            CdEntry::Method(m) => Ok(cd_predictions(pairs, m)?),
        }
    }
}

fn default_featurizer() -> FeaturizerConfig {
    FeaturizerConfig::hashed_tfidf(DEFAULT_DIM)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    #[serde(default)]
    pub experts: Vec<ExpertEntry>,
    #[serde(default)]
    pub cd_methods: Vec<CdEntry>,
    #[serde(default = "default_featurizer")]
    pub featurizer: FeaturizerConfig,
    #[serde(default)]
    pub hp: ForestHyperparams,
    pub train_seeds: Vec<u64>,
    /// Defaults to each training seed plus 1000.
    #[serde(default)]
    pub baseline_seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Hyperparameter grid for `loo`; the full default grid when absent.
    #[serde(default)]
    pub grid: Option<Vec<GridPoint>>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = read_json(path)?;
        if cfg.baseline_seeds.is_none() {
            cfg.baseline_seeds = Some(cfg.train_seeds.iter().map(|s| s + 1000).collect());
        }
        Ok(cfg)
    }

    pub fn baseline_seeds(&self) -> Vec<u64> {
        self.baseline_seeds
            .clone()
            .unwrap_or_else(|| self.train_seeds.iter().map(|s| s + 1000).collect())
    }

    /// Checks what can be checked without touching data.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.experts.is_empty() {
            return Err(CliError::Usage("config lists no experts".into()));
        }
        if self.cd_methods.is_empty() {
            return Err(CliError::Usage("config lists no CD methods".into()));
        }
        if self.train_seeds.is_empty() {
            return Err(CliError::Usage("config lists no training seeds".into()));
        }
        if self.baseline_seeds().len() != self.train_seeds.len() {
            return Err(CliError::Usage("baseline_seeds and train_seeds differ in length".into()));
        }
        self.featurizer.validate()?;
        self.hp.validate()?;
        Ok(())
    }

    /// Train and test pairs.
    pub fn load_pairs(&self) -> Result<(Vec<CausalPair>, Vec<CausalPair>), CliError> {
        match &self.data {
            DataSource::Synthetic(spec) => Ok(stratified_split(&generate_synthetic::<f64>(spec)?)),
            DataSource::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
                Ok(stratified_split(&pairs_from_json::<f64>(&text)?))
            }
            DataSource::Tuebingen { root, overlay } => {
                let mut loader = PairLoader::new(root);
                if let Some(o) = overlay {
                    loader = loader.with_overlay(o);
                }
                let table = split_table();
                let load = |split: Split| -> Result<Vec<CausalPair>, CliError> {
                    table.ids_in(split).into_iter().map(|id| Ok(loader.load(id)?)).collect()
                };
                Ok((load(Split::Train)?, load(Split::Test)?))
            }
        }
    }

    pub fn experts(&self) -> Result<Vec<Expert>, CliError> {
        let mut out = Vec::new();
        for entry in &self.experts {
            match entry {
                ExpertEntry::Epsilon { epsilon, seed } => {
                    out.push(Expert::Synthetic(make_epsilon_expert(*epsilon, *seed)?));
                }
                ExpertEntry::P { domains } => out.push(Expert::Synthetic(p_expert_from_name(domains)?)),
                ExpertEntry::AllP => out.extend(all_p_experts().into_iter().map(Expert::Synthetic)),
                ExpertEntry::Remote(cfg) => out.push(Expert::Remote(RemoteExpert::new(cfg.clone())?)),
            }
        }
        let mut names: Vec<String> = out.iter().map(Expert::name).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Usage("two experts share a name".into()));
        }
        Ok(out)
    }

    /// Cache directories of every remote component, for the manifest.
    pub fn cache_dirs(&self) -> Vec<PathBuf> {
        let mut dirs: Vec<PathBuf> = self
            .experts
            .iter()
            .filter_map(|e| match e {
                ExpertEntry::Remote(c) => Some(c.cache_dir.clone()),
                _ => None,
            })
            .chain(self.featurizer.cache_dir.clone())
            .collect();
        dirs.sort();
        dirs.dedup();
        dirs
    }
}

/// Input of the `graph` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// Graph to order. Its edges, when present, are used only to report the
    /// violation rate.
    pub graph: LabeledGraph,
    /// Graphs with known edges to train the deferral model on.
    #[serde(default)]
    pub training_graphs: Vec<LabeledGraph>,
    /// Scores each node pair on its data columns.
    #[serde(default)]
    pub cd: Option<CdMethod>,
    /// Recorded expert answers `(u, v, ancestry)`; unlisted pairs read as
    /// no ancestry.
    #[serde(default)]
    pub expert_answers: Option<Vec<(String, String, Ancestry)>>,
    #[serde(default = "default_featurizer")]
    pub featurizer: FeaturizerConfig,
    #[serde(default)]
    pub hp: ForestHyperparams,
}
