//! Learning to defer between pairwise causal discovery methods and experts
//! that only see a text description of the variables.
//!
//! The numeric core is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the common `f64` and `f32` instantiations.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cd;
pub mod data;
pub mod defer;
pub mod eval;
pub mod experts;
pub mod features;
pub mod graphext;
pub mod remote;
pub mod rng;
pub mod scalar;

pub use cd::{CdError, CdMethod, Direction, DirectionScore};
pub use data::{DataError, Domain};
pub use defer::{DeferError, DeferralDecision, ForestHyperparams};
pub use eval::{AccuracyRow, EvalError, Estimate};
pub use experts::{Expert, ExpertError, ExpertPrediction, SyntheticExpertSpec};
pub use features::{FeatureError, FeaturizerConfig};
pub use graphext::{Ancestry, GraphError, Ranking};
pub use scalar::Real;

pub type Pair = data::CausalPair<f64>;
pub type PairF32 = data::CausalPair<f32>;
pub type Score = cd::DirectionScore<f64>;
pub type ScoreF32 = cd::DirectionScore<f32>;
pub type Features = features::FeatureVector<f64>;
pub type FeaturesF32 = features::FeatureVector<f32>;
pub type Model = defer::DeferralModel<f64>;
pub type ModelF32 = defer::DeferralModel<f32>;
pub type Graph = graphext::LabeledGraph<f64>;
pub type GraphF32 = graphext::LabeledGraph<f32>;
