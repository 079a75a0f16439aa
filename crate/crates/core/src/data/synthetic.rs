use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{CausalPair, DataError, Domain};
use crate::cd::Direction;
use crate::rng::{keyed_rng, Stream};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// `effect = a * cause + uniform noise`, cause uniform, `|a|` in `[0.5, 2]`.
    LinearNonGaussian,
    /// `effect = cause + cause^3 + noise_scale * gaussian`, cause uniform on `[0, 1]`.
    NonlinearAnm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticBenchSpec {
    pub n_pairs_per_domain: usize,
    pub n_samples: usize,
    pub mechanism: Mechanism,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticBenchSpec {
    fn default() -> Self {
        Self {
            n_pairs_per_domain: 20,
            n_samples: 200,
            mechanism: Mechanism::NonlinearAnm,
            noise_scale: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticBenchSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.n_pairs_per_domain == 0 {
            return Err(DataError::InvalidSpec("n_pairs_per_domain must be positive".into()));
        }
        if self.n_samples < 10 {
            return Err(DataError::InvalidSpec("n_samples must be at least 10".into()));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return Err(DataError::InvalidSpec("noise_scale must be positive".into()));
        }
        Ok(())
    }
}

fn vocabulary(domain: Domain) -> &'static [&'static str] {
    match domain {
        Domain::Biology => &[
            "shell length",
            "whole weight",
            "number of rings",
            "leaf area",
            "root depth",
            "wing span",
            "gene expression level",
            "cell count",
        ],
        Domain::ClimateEnvironment => &[
            "altitude",
            "mean annual temperature",
            "precipitation",
            "ozone concentration",
            "solar radiation",
            "snow cover",
            "river discharge",
            "wind speed",
        ],
        Domain::EconomicsFinance => &[
            "household income",
            "stock return",
            "interest rate",
            "unemployment rate",
            "consumer spending",
            "exchange rate",
            "gross domestic product",
            "inflation",
        ],
        Domain::Medicine => &[
            "patient age",
            "blood pressure",
            "cholesterol",
            "pulse",
            "drug dosage",
            "tumor size",
            "body mass index",
            "recovery time",
        ],
        Domain::Physics => &[
            "voltage",
            "current",
            "pendulum mass",
            "oscillation period",
            "capacitance",
            "volume",
            "magnetic field strength",
            "particle velocity",
        ],
    }
}

/// Draws a synthetic benchmark: `n_pairs_per_domain` pairs per domain, ids
/// assigned consecutively from 1 in domain order. Every pair is generated from
/// its own keyed stream, so the output is reproducible on any platform.
pub fn generate_synthetic<T: Real>(
    spec: &SyntheticBenchSpec,
) -> Result<Vec<CausalPair<T>>, DataError> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.n_pairs_per_domain * Domain::ALL.len());
    let mut id = 1u32;
    for domain in Domain::ALL {
        for _ in 0..spec.n_pairs_per_domain {
            out.push(generate_one(spec, id, domain));
            id += 1;
        }
    }
    Ok(out)
}

fn generate_one<T: Real>(spec: &SyntheticBenchSpec, id: u32, domain: Domain) -> CausalPair<T> {
    let mut rng = keyed_rng(spec.seed, Stream::Synthetic, id as u64);
    let truth = if rng.random_bool(0.5) {
        Direction::Forward
    } else {
        Direction::Backward
    };

    let n = spec.n_samples;
    let (cause, effect): (Vec<f64>, Vec<f64>) = match spec.mechanism {
        Mechanism::LinearNonGaussian => {
            let magnitude = rng.random_range(0.5..=2.0);
            let a = if rng.random_bool(0.5) { magnitude } else { -magnitude };
            (0..n)
                .map(|_| {
                    let c: f64 = rng.random_range(-1.0..1.0);
                    let e = a * c + spec.noise_scale * rng.random_range(-1.0..1.0);
                    (c, e)
                })
                .unzip()
        }
        Mechanism::NonlinearAnm => (0..n)
            .map(|_| {
                let c: f64 = rng.random_range(0.0..1.0);
                let z: f64 = StandardNormal.sample(&mut rng);
                (c, c + c * c * c + spec.noise_scale * z)
            })
            .unzip(),
    };
    let (x_u, x_v) = match truth {
        Direction::Forward => (cause, effect),
        Direction::Backward => (effect, cause),
    };

    let vocab = vocabulary(domain);
    let picked: Vec<&&str> = vocab.choose_multiple(&mut rng, 2).collect();
    let (name_u, name_v) = (picked[0].to_string(), picked[1].to_string());
    let description = format!(
        "Data from a {} study. The first column (x) records {name_u} and the \
         second column (y) records {name_v}.",
        domain.label().to_lowercase()
    );

    CausalPair {
        id,
        name_u,
        name_v,
        x_u: x_u.into_iter().map(T::lit).collect(),
        x_v: x_v.into_iter().map(T::lit).collect(),
        description,
        domain,
        truth,
        weight: T::one(),
    }
}

/// Serializes pairs as a JSON array of plain objects.
pub fn pairs_to_json<T: Real>(pairs: &[CausalPair<T>]) -> String {
    serde_json::to_string_pretty(pairs).expect("pairs serialize")
}

pub fn pairs_from_json<T: Real>(json: &str) -> Result<Vec<CausalPair<T>>, DataError> {
    let pairs: Vec<CausalPair<T>> = serde_json::from_str(json)
        .map_err(|e| DataError::InvalidSpec(format!("bad pair json: {e}")))?;
    for p in &pairs {
        p.validate()?;
    }
    Ok(pairs)
}
