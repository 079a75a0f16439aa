//! Cause-effect pairs: types, the benchmark loader, the domain/split table and
//! a synthetic generator for offline experiments.

mod loader;
mod split;
mod synthetic;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cd::Direction;
use crate::scalar::{all_finite, Real};

pub use loader::{load_pair, read_two_columns, PairLoader, MAX_ROWS};
pub use split::{split_table, stratified_split, Split, SplitTable, MULTIVARIATE_IDS};
pub use synthetic::{generate_synthetic, pairs_from_json, pairs_to_json, Mechanism, SyntheticBenchSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("malformed numeric data in {path}: {reason}")]
    MalformedNumeric { path: PathBuf, reason: String },
    #[error("pair {0} is multivariate")]
    MultivariatePair(u32),
    #[error("pair id {0} is not in the split table")]
    UnknownId(u32),
    #[error("malformed meta file {path}: {reason}")]
    MalformedMeta { path: PathBuf, reason: String },
    #[error("invalid pair: {0}")]
    InvalidPair(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Subject-matter domain of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    Biology,
    ClimateEnvironment,
    EconomicsFinance,
    Medicine,
    Physics,
}

impl Domain {
    pub const ALL: [Domain; 5] = [
        Domain::Biology,
        Domain::ClimateEnvironment,
        Domain::EconomicsFinance,
        Domain::Medicine,
        Domain::Physics,
    ];

    /// Single-letter initial used in p-expert names.
    pub fn initial(self) -> char {
        match self {
            Domain::Biology => 'B',
            Domain::ClimateEnvironment => 'C',
            Domain::EconomicsFinance => 'E',
            Domain::Medicine => 'M',
            Domain::Physics => 'P',
        }
    }

    pub fn from_initial(c: char) -> Option<Domain> {
        Domain::ALL
            .into_iter()
            .find(|d| d.initial() == c.to_ascii_uppercase())
    }

    pub fn label(self) -> &'static str {
        match self {
            Domain::Biology => "Biology",
            Domain::ClimateEnvironment => "Climate/Environment",
            Domain::EconomicsFinance => "Economics/Finance",
            Domain::Medicine => "Medicine",
            Domain::Physics => "Physics",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Domain {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let d = match norm.as_str() {
            "biology" | "b" => Domain::Biology,
            "climateenvironment" | "climate" | "c" => Domain::ClimateEnvironment,
            "economicsfinance" | "economics" | "e" => Domain::EconomicsFinance,
            "medicine" | "m" => Domain::Medicine,
            "physics" | "p" => Domain::Physics,
            _ => return Err(DataError::UnknownDomain(s.to_string())),
        };
        Ok(d)
    }
}

/// One bivariate cause-effect instance.
///
/// `x_u` is the first column (named "x" in expert prompts) and `x_v` the
/// second. `truth` is `Forward` when the first column causes the second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CausalPair<T: Real = f64> {
    pub id: u32,
    pub name_u: String,
    pub name_v: String,
    pub x_u: Vec<T>,
    pub x_v: Vec<T>,
    pub description: String,
    pub domain: Domain,
    pub truth: Direction,
    pub weight: T,
}

impl<T: Real> CausalPair<T> {
    /// Checks the structural invariants of a pair.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.x_u.len() != self.x_v.len() {
            return Err(DataError::InvalidPair(format!(
                "pair {}: column lengths differ ({} vs {})",
                self.id,
                self.x_u.len(),
                self.x_v.len()
            )));
        }
        if self.x_u.len() < 2 {
            return Err(DataError::InvalidPair(format!(
                "pair {}: fewer than 2 samples",
                self.id
            )));
        }
        if !all_finite(&self.x_u) || !all_finite(&self.x_v) {
            return Err(DataError::InvalidPair(format!(
                "pair {}: non-finite entries",
                self.id
            )));
        }
        if self.description.trim().is_empty() {
            return Err(DataError::InvalidPair(format!(
                "pair {}: empty description",
                self.id
            )));
        }
        if !(self.weight > T::zero()) {
            return Err(DataError::InvalidPair(format!(
                "pair {}: weight must be positive",
                self.id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x_u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_u.is_empty()
    }
}
