//! Expert predictors over the textual description of a pair.
//!
//! Synthetic experts are correct with a fixed probability per domain. The
//! remote expert asks a chat-completion endpoint and parses its answer.

mod prompt;
mod remote;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cd::Direction;
use crate::data::{CausalPair, Domain};
use crate::remote::TransportError;
use crate::rng::{keyed_rng, Stream};
use crate::scalar::Real;

pub use prompt::{build_prompt, parse_answer, SYSTEM_PROMPT};
pub use remote::{remote_predict, CachedAnswer, RemoteExpert, RemoteExpertConfig};

#[derive(Debug, Error)]
pub enum ExpertError {
    #[error("epsilon {0} must lie in (0, 0.5)")]
    OutOfRange(f64),
    #[error("a p-expert needs exactly 3 good domains, got {0}")]
    WrongCardinality(usize),
    #[error("probability for {0} missing or outside [0, 1]")]
    InvalidProbability(Domain),
    #[error("empty description")]
    EmptyDescription,
    #[error("could not parse answer: {0:?}")]
    Unparseable(String),
    #[error("answer names both directions: {0:?}")]
    Ambiguous(String),
    #[error("no API key in the environment and no cached answer")]
    AuthMissing,
    #[error("invalid expert config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertPrediction {
    pub pair_id: u32,
    pub direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_answer: Option<String>,
}

/// Grouping used when averaging leave-one-out scores over experts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertKind {
    Epsilon,
    P,
    Remote,
}

impl fmt::Display for ExpertKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExpertKind::Epsilon => "epsilon",
            ExpertKind::P => "p",
            ExpertKind::Remote => "remote",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticExpertSpec {
    pub name: String,
    pub kind: ExpertKind,
    pub p_by_domain: BTreeMap<Domain, f64>,
    pub seed: u64,
}

impl SyntheticExpertSpec {
    pub fn new(
        name: impl Into<String>,
        kind: ExpertKind,
        p_by_domain: BTreeMap<Domain, f64>,
        seed: u64,
    ) -> Result<Self, ExpertError> {
        let spec = Self {
            name: name.into(),
            kind,
            p_by_domain,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ExpertError> {
        for d in Domain::ALL {
            match self.p_by_domain.get(&d) {
                Some(p) if (0.0..=1.0).contains(p) => {}
                _ => return Err(ExpertError::InvalidProbability(d)),
            }
        }
        Ok(())
    }

    pub fn p(&self, domain: Domain) -> f64 {
        self.p_by_domain[&domain]
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// True when every probability is 0 or 1, so the seed is irrelevant.
    pub fn is_deterministic(&self) -> bool {
        self.p_by_domain.values().all(|&p| p == 0.0 || p == 1.0)
    }
}

/// Domains on which the epsilon-expert is mostly right.
pub const EPSILON_GOOD_DOMAINS: [Domain; 3] =
    [Domain::Biology, Domain::EconomicsFinance, Domain::Physics];

/// Right with probability `1 - epsilon` on Biology, Economics/Finance and
/// Physics, and with probability `epsilon` on the other two domains.
pub fn make_epsilon_expert(epsilon: f64, seed: u64) -> Result<SyntheticExpertSpec, ExpertError> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(ExpertError::OutOfRange(epsilon));
    }
    let p_by_domain = Domain::ALL
        .iter()
        .map(|&d| {
            let p = if EPSILON_GOOD_DOMAINS.contains(&d) {
                1.0 - epsilon
            } else {
                epsilon
            };
            (d, p)
        })
        .collect();
    SyntheticExpertSpec::new(format!("eps={epsilon}"), ExpertKind::Epsilon, p_by_domain, seed)
}

/// Always right on the three given domains and always wrong elsewhere.
/// Named by the initials of the good domains, e.g. `BCE`.
pub fn make_p_expert(good_domains: &BTreeSet<Domain>) -> Result<SyntheticExpertSpec, ExpertError> {
    if good_domains.len() != 3 {
        return Err(ExpertError::WrongCardinality(good_domains.len()));
    }
    let name: String = good_domains.iter().map(|d| d.initial()).collect();
    let p_by_domain = Domain::ALL
        .iter()
        .map(|d| (*d, if good_domains.contains(d) { 1.0 } else { 0.0 }))
        .collect();
    SyntheticExpertSpec::new(name, ExpertKind::P, p_by_domain, 0)
}

/// Parses a p-expert name such as `"BCE"`.
pub fn p_expert_from_name(name: &str) -> Result<SyntheticExpertSpec, ExpertError> {
    let mut set = BTreeSet::new();
    for c in name.chars() {
        let d = Domain::from_initial(c)
            .ok_or_else(|| ExpertError::InvalidConfig(format!("unknown domain initial {c:?}")))?;
        set.insert(d);
    }
    if set.len() != name.chars().count() {
        return Err(ExpertError::InvalidConfig(format!("repeated initial in {name:?}")));
    }
    make_p_expert(&set)
}

/// All ten p-experts in lexicographic order of their names.
pub fn all_p_experts() -> Vec<SyntheticExpertSpec> {
    let mut out = Vec::with_capacity(10);
    let d = Domain::ALL;
    for i in 0..5 {
        for j in i + 1..5 {
            for k in j + 1..5 {
                let set: BTreeSet<Domain> = [d[i], d[j], d[k]].into_iter().collect();
                out.push(make_p_expert(&set).expect("three domains"));
            }
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

/// Bernoulli draw from a stream keyed by `(spec.seed, pair.id)`: success gives
/// the true direction, failure the opposite one.
pub fn synthetic_predict<T: Real>(spec: &SyntheticExpertSpec, pair: &CausalPair<T>) -> ExpertPrediction {
    let p = spec.p(pair.domain);
    let mut rng = keyed_rng(spec.seed, Stream::Expert, u64::from(pair.id));
    let correct = rng.random::<f64>() < p;
    ExpertPrediction {
        pair_id: pair.id,
        direction: if correct { pair.truth } else { pair.truth.flip() },
        raw_answer: None,
    }
}

/// Any expert usable in an experiment.
#[derive(Debug, Clone)]
pub enum Expert {
    Synthetic(SyntheticExpertSpec),
    Remote(RemoteExpert),
}

impl Expert {
    pub fn name(&self) -> String {
        match self {
            Expert::Synthetic(s) => s.name.clone(),
            Expert::Remote(r) => r.config().model_name.clone(),
        }
    }

    pub fn kind(&self) -> ExpertKind {
        match self {
            Expert::Synthetic(s) => s.kind,
            Expert::Remote(_) => ExpertKind::Remote,
        }
    }

    /// Same expert with its randomness driven by `seed`.
    pub fn reseeded(&self, seed: u64) -> Expert {
        match self {
            Expert::Synthetic(s) => Expert::Synthetic(s.with_seed(seed)),
            Expert::Remote(r) => Expert::Remote(r.with_seed(seed)),
        }
    }

    pub fn predict<T: Real>(&self, pair: &CausalPair<T>) -> Result<ExpertPrediction, ExpertError> {
        match self {
            Expert::Synthetic(s) => Ok(synthetic_predict(s, pair)),
            Expert::Remote(r) => r.predict(pair),
        }
    }
}
