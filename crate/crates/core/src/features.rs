//! Fixed-length numeric features from a pair's description text.
//!
//! Only the text is used; the numeric columns never reach the deferral
//! classifier.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::remote::{api_key_from_env, content_key, http_client, post_json, ContentCache, TransportError};
use crate::scalar::Real;

pub const DEFAULT_DIM: usize = 50;
/// Embedding sizes searched during model selection.
pub const DIM_GRID: [usize; 5] = [5, 10, 15, 20, 50];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("empty description")]
    EmptyDescription,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("document {0} has no tokens")]
    EmptyDocument(usize),
    #[error("first {0} coordinates are all zero")]
    DegenerateTruncation(usize),
    #[error("requested {want} dimensions from a vector of length {have}")]
    TooShort { want: usize, have: usize },
    #[error("invalid featurizer config: {0}")]
    InvalidConfig(String),
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("no API key in the environment and no cached embedding")]
    AuthMissing,
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", transparent)]
pub struct FeatureVector<T: Real = f64> {
    pub values: Vec<T>,
}

impl<T: Real> FeatureVector<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> T {
        self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturizerKind {
    RemoteEmbedding,
    HashedTfidf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub kind: FeaturizerKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

fn default_timeout() -> f64 {
    60.0
}

impl FeaturizerConfig {
    pub fn hashed_tfidf(dim: usize) -> Self {
        Self {
            kind: FeaturizerKind::HashedTfidf,
            dim,
            endpoint: None,
            model_name: None,
            cache_dir: None,
            timeout_s: default_timeout(),
        }
    }

    pub fn with_dim(&self, dim: usize) -> Self {
        Self {
            dim,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.dim < 2 {
            return Err(FeatureError::InvalidConfig(format!("dim {} < 2", self.dim)));
        }
        if self.kind == FeaturizerKind::RemoteEmbedding {
            let missing = |what: &str| FeatureError::InvalidConfig(format!("{what} required for remote embeddings"));
            if self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty()) {
                return Err(missing("endpoint"));
            }
            if self.model_name.as_deref().is_none_or(|m| m.trim().is_empty()) {
                return Err(missing("model_name"));
            }
            if self.cache_dir.is_none() {
                return Err(missing("cache_dir"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CachedEmbedding {
    request_hash: String,
    model: String,
    embedding: Vec<f64>,
}

/// Full embedding vector for one description, as served. Cached by
/// `(model_name, description)`.
pub fn embed_remote(cfg: &FeaturizerConfig, description: &str) -> Result<Vec<f64>, FeatureError> {
    embed_remote_with_key(cfg, description, api_key_from_env().as_deref())
}

pub fn embed_remote_with_key(
    cfg: &FeaturizerConfig,
    description: &str,
    api_key: Option<&str>,
) -> Result<Vec<f64>, FeatureError> {
    if cfg.kind != FeaturizerKind::RemoteEmbedding {
        return Err(FeatureError::InvalidConfig("not a remote embedding config".into()));
    }
    cfg.validate()?;
    if description.trim().is_empty() {
        return Err(FeatureError::EmptyDescription);
    }
    let model = cfg.model_name.as_deref().unwrap_or_default();
    let cache = ContentCache::new(cfg.cache_dir.clone().unwrap_or_default());
    let key = content_key(&["embedding", model, description]);
    if let Some(hit) = cache.get::<CachedEmbedding>(&key) {
        return Ok(hit.embedding);
    }
    let api_key = api_key.ok_or(FeatureError::AuthMissing)?;
    let client = http_client(cfg.timeout_s);
    let resp = post_json(
        &client,
        cfg.endpoint.as_deref().unwrap_or_default(),
        api_key,
        &json!({"model": model, "input": description}),
    )?;
    let embedding: Vec<f64> = resp
        .pointer("/data/0/embedding")
        .and_then(|v| v.as_array())
        .and_then(|a| a.iter().map(|x| x.as_f64()).collect::<Option<Vec<_>>>())
        .ok_or_else(|| TransportError::Decode("missing data[0].embedding".into()))?;
    if embedding.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite);
    }
    cache.put(
        &key,
        &CachedEmbedding {
            request_hash: key.clone(),
            model: model.to_string(),
            embedding: embedding.clone(),
        },
    )?;
    Ok(embedding)
}

/// Keeps the first `d` coordinates and rescales them to unit length.
pub fn reduce_embedding<T: Real>(raw: &[T], d: usize) -> Result<FeatureVector<T>, FeatureError> {
    if d == 0 || d > raw.len() {
        return Err(FeatureError::TooShort {
            want: d,
            have: raw.len(),
        });
    }
    let head = &raw[..d];
    if head.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite);
    }
    let norm = head.iter().map(|&v| v * v).sum::<T>().sqrt();
    if norm == T::zero() {
        return Err(FeatureError::DegenerateTruncation(d));
    }
    Ok(FeatureVector {
        values: head.iter().map(|&v| v / norm).collect(),
    })
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn bucket(token: &str, dim: usize) -> usize {
    (fnv1a64(token.as_bytes()) % dim as u64) as usize
}

/// Hashed TF-IDF with smoothed inverse document frequency
/// `ln((1 + N) / (1 + df)) + 1`, fitted on a training corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVectorizer {
    pub dim: usize,
    pub idf: Vec<f64>,
}

impl TfidfVectorizer {
    pub fn fit<S: AsRef<str>>(corpus: &[S], dim: usize) -> Result<Self, FeatureError> {
        if corpus.is_empty() {
            return Err(FeatureError::EmptyCorpus);
        }
        if dim < 2 {
            return Err(FeatureError::InvalidConfig(format!("dim {dim} < 2")));
        }
        let mut df = vec![0usize; dim];
        for doc in corpus {
            let buckets: BTreeSet<usize> = tokenize(doc.as_ref()).iter().map(|t| bucket(t, dim)).collect();
            for b in buckets {
                df[b] += 1;
            }
        }
        let n = corpus.len() as f64;
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Ok(Self { dim, idf })
    }

    /// Unit-norm vector for one document. `index` only labels errors.
    pub fn transform_one<T: Real>(&self, doc: &str, index: usize) -> Result<FeatureVector<T>, FeatureError> {
        let mut tf = vec![0.0f64; self.dim];
        for t in tokenize(doc) {
            tf[bucket(&t, self.dim)] += 1.0;
        }
        let w: Vec<f64> = tf.iter().zip(&self.idf).map(|(a, b)| a * b).collect();
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(FeatureError::EmptyDocument(index));
        }
        Ok(FeatureVector {
            values: w.iter().map(|&v| T::lit(v / norm)).collect(),
        })
    }

    pub fn transform<T: Real, S: AsRef<str>>(&self, docs: &[S]) -> Result<Vec<FeatureVector<T>>, FeatureError> {
        docs.iter()
            .enumerate()
            .map(|(i, d)| self.transform_one(d.as_ref(), i))
            .collect()
    }
}

/// Fits on `corpus` and transforms it.
pub fn hashed_tfidf<T: Real, S: AsRef<str>>(corpus: &[S], dim: usize) -> Result<Vec<FeatureVector<T>>, FeatureError> {
    TfidfVectorizer::fit(corpus, dim)?.transform(corpus)
}

/// A featurizer ready to map descriptions to vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedFeaturizer {
    HashedTfidf(TfidfVectorizer),
    RemoteEmbedding { config: FeaturizerConfig },
}

impl FittedFeaturizer {
    pub fn fit<S: AsRef<str>>(cfg: &FeaturizerConfig, corpus: &[S]) -> Result<Self, FeatureError> {
        cfg.validate()?;
        Ok(match cfg.kind {
            FeaturizerKind::HashedTfidf => FittedFeaturizer::HashedTfidf(TfidfVectorizer::fit(corpus, cfg.dim)?),
            FeaturizerKind::RemoteEmbedding => FittedFeaturizer::RemoteEmbedding { config: cfg.clone() },
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            FittedFeaturizer::HashedTfidf(v) => v.dim,
            FittedFeaturizer::RemoteEmbedding { config } => config.dim,
        }
    }

    pub fn featurize<T: Real>(&self, description: &str) -> Result<FeatureVector<T>, FeatureError> {
        match self {
            FittedFeaturizer::HashedTfidf(v) => v.transform_one(description, 0),
            FittedFeaturizer::RemoteEmbedding { config } => {
                let raw: Vec<T> = embed_remote(config, description)?.into_iter().map(T::lit).collect();
                reduce_embedding(&raw, config.dim)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduce_examples() {
        let v = reduce_embedding(&[3.0, 4.0, 0.0, 0.0], 2).unwrap();
        assert!((v.values[0] - 0.6f64).abs() < 1e-15 && (v.values[1] - 0.8f64).abs() < 1e-15);
        let unit = [0.6, 0.0, 0.8];
        assert_eq!(reduce_embedding(&unit, 3).unwrap().values, unit.to_vec());
        assert!(matches!(
            reduce_embedding(&[0.0, 0.0, 5.0], 2),
            Err(FeatureError::DegenerateTruncation(2))
        ));
        assert!(matches!(reduce_embedding(&[1.0], 2), Err(FeatureError::TooShort { .. })));
    }

    #[test]
    fn fnv_reference_values() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Age (years) & HEIGHT--cm"), ["age", "years", "height", "cm"]);
        assert!(tokenize(" ,.; ").is_empty());
    }

    #[test]
    fn identical_documents_identical_vectors() {
        let v: Vec<FeatureVector> = hashed_tfidf(&["rainfall and runoff", "rainfall and runoff", "wages"], 64).unwrap();
        assert_eq!(v[0], v[1]);
        for f in &v {
            assert!((f.norm() - 1.0).abs() < 1e-12);
            assert_eq!(f.dim(), 64);
        }
    }

    #[test]
    fn empty_inputs_rejected() {
        let none: [&str; 0] = [];
        assert!(matches!(hashed_tfidf::<f64, _>(&none, 8), Err(FeatureError::EmptyCorpus)));
        assert!(matches!(
            hashed_tfidf::<f64, _>(&["ok", "--"], 8),
            Err(FeatureError::EmptyDocument(1))
        ));
    }

    #[test]
    fn golden_two_document_corpus() {
        // "a b" and "b"; dim 2^16 so no collisions among {a, b}
        let dim = 1 << 16;
        assert_ne!(bucket("a", dim), bucket("b", dim));
        let v: Vec<FeatureVector> = hashed_tfidf(&["a b", "b"], dim).unwrap();
        let idf_a = (3.0f64 / 2.0).ln() + 1.0;
        let idf_b = 1.0;
        let n = (idf_a * idf_a + idf_b * idf_b).sqrt();
        assert!((v[0].values[bucket("a", dim)] - idf_a / n).abs() < 1e-15);
        assert!((v[0].values[bucket("b", dim)] - idf_b / n).abs() < 1e-15);
        assert_eq!(v[1].values[bucket("b", dim)], 1.0);
    }

    #[test]
    fn remote_config_requires_endpoint() {
        let mut c = FeaturizerConfig::hashed_tfidf(50);
        c.kind = FeaturizerKind::RemoteEmbedding;
        assert!(c.validate().is_err());
        assert!(FeaturizerConfig::hashed_tfidf(1).validate().is_err());
    }
}
