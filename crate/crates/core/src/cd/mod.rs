//! Pairwise causal-direction scorers working on the two numeric columns only.
//!
//! Every scorer returns the direction whose "effect given cause" model fits
//! better, together with a non-negative margin. Exact score ties resolve to
//! [`Direction::Forward`].

mod bqcd;
mod lingam;
mod lstsq;
mod reci;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{all_finite, Real};

pub use bqcd::{bqcd_lite, default_neighbors, DEFAULT_QUANTILES};
pub use lingam::{max_ent_entropy, pair_lingam, ENTROPY_CONSTANTS};
pub use reci::{reci, DEFAULT_DEGREE};

#[derive(Debug, Error, PartialEq)]
pub enum CdError {
    #[error("columns have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("non-finite input")]
    NonFinite,
    #[error("quantile {0} outside (0, 1)")]
    InvalidQuantile(f64),
    #[error("neighbor count {k} must be positive and below the sample size {n}")]
    InvalidNeighbors { k: usize, n: usize },
    #[error("unknown causal discovery method {0:?}")]
    UnknownMethod(String),
}

/// Orientation of a pair: `Forward` means the first column causes the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn flip(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdKind {
    Reci,
    PairLingam,
    BqcdLite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DirectionScore<T: Real = f64> {
    pub direction: Direction,
    pub score: T,
    pub method: CdKind,
}

impl<T: Real> DirectionScore<T> {
    /// `fwd` is the loss of modelling the second column given the first.
    pub(crate) fn from_losses(fwd: T, bwd: T, method: CdKind) -> Self {
        let direction = if fwd <= bwd {
            Direction::Forward
        } else {
            Direction::Backward
        };
        Self {
            direction,
            score: (fwd - bwd).abs(),
            method,
        }
    }
}

/// A configured scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CdMethod {
    Reci {
        #[serde(default = "default_degree")]
        degree: usize,
    },
    PairLingam,
    BqcdLite {
        #[serde(default = "default_quantiles")]
        quantiles: Vec<f64>,
        /// `None` selects `max(10, floor(sqrt(N)))`.
        #[serde(default)]
        k: Option<usize>,
    },
}

fn default_degree() -> usize {
    DEFAULT_DEGREE
}

fn default_quantiles() -> Vec<f64> {
    DEFAULT_QUANTILES.to_vec()
}

impl CdMethod {
    pub fn reci() -> Self {
        CdMethod::Reci {
            degree: DEFAULT_DEGREE,
        }
    }

    pub fn bqcd_lite() -> Self {
        CdMethod::BqcdLite {
            quantiles: default_quantiles(),
            k: None,
        }
    }

    pub fn kind(&self) -> CdKind {
        match self {
            CdMethod::Reci { .. } => CdKind::Reci,
            CdMethod::PairLingam => CdKind::PairLingam,
            CdMethod::BqcdLite { .. } => CdKind::BqcdLite,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind() {
            CdKind::Reci => "RECI",
            CdKind::PairLingam => "LiNGAM",
            CdKind::BqcdLite => "bQCD",
        }
    }

    pub fn score<T: Real>(&self, x: &[T], y: &[T]) -> Result<DirectionScore<T>, CdError> {
        match self {
            CdMethod::Reci { degree } => reci(x, y, *degree),
            CdMethod::PairLingam => pair_lingam(x, y),
            CdMethod::BqcdLite { quantiles, k } => {
                let k = k.unwrap_or_else(|| default_neighbors(x.len()));
                bqcd_lite(x, y, quantiles, k)
            }
        }
    }
}

impl FromStr for CdMethod {
    type Err = CdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "reci" => Ok(CdMethod::reci()),
            "pair_lingam" | "lingam" | "pairlingam" => Ok(CdMethod::PairLingam),
            "bqcd_lite" | "bqcd" => Ok(CdMethod::bqcd_lite()),
            _ => Err(CdError::UnknownMethod(s.to_string())),
        }
    }
}

pub(crate) fn check_columns<T: Real>(x: &[T], y: &[T], min_len: usize) -> Result<(), CdError> {
    if x.len() != y.len() {
        return Err(CdError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min_len {
        return Err(CdError::TooFewSamples {
            needed: min_len,
            got: x.len(),
        });
    }
    if !all_finite(x) || !all_finite(y) {
        return Err(CdError::NonFinite);
    }
    Ok(())
}

pub(crate) fn min_max<T: Real>(xs: &[T]) -> (T, T) {
    xs.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_parse() {
        assert_eq!("reci".parse::<CdMethod>().unwrap().kind(), CdKind::Reci);
        assert_eq!("LiNGAM".parse::<CdMethod>().unwrap().kind(), CdKind::PairLingam);
        assert_eq!("bqcd".parse::<CdMethod>().unwrap().kind(), CdKind::BqcdLite);
        assert!("anm".parse::<CdMethod>().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let m: CdMethod = serde_json::from_str(r#"{"method":"bqcd_lite"}"#).unwrap();
        assert_eq!(m, CdMethod::bqcd_lite());
        let m: CdMethod = serde_json::from_str(r#"{"method":"reci","degree":2}"#).unwrap();
        assert_eq!(m, CdMethod::Reci { degree: 2 });
    }

    #[test]
    fn tie_resolves_forward() {
        let s = DirectionScore::from_losses(1.0, 1.0, CdKind::Reci);
        assert_eq!(s.direction, Direction::Forward);
        assert_eq!(s.score, 0.0);
    }
}
