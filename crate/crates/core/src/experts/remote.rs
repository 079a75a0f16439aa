use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{build_prompt, parse_answer, ExpertError, ExpertPrediction};
use crate::cd::Direction;
use crate::data::CausalPair;
use crate::remote::{api_key_from_env, content_key, http_client, post_json, ContentCache, TransportError};
use crate::scalar::Real;

const ATTEMPTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteExpertConfig {
    pub endpoint_url: String,
    pub model_name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    pub cache_dir: PathBuf,
}

fn default_timeout() -> f64 {
    60.0
}

impl RemoteExpertConfig {
    pub fn validate(&self) -> Result<(), ExpertError> {
        if self.endpoint_url.trim().is_empty() {
            return Err(ExpertError::InvalidConfig("endpoint_url is empty".into()));
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(ExpertError::InvalidConfig("timeout_s must be positive".into()));
        }
        Ok(())
    }
}

/// One cached query. Files are named after `request_hash`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedAnswer {
    pub request_hash: String,
    pub model: String,
    pub seed: u64,
    pub raw_response: String,
    pub direction: Direction,
}

#[derive(Debug, Clone)]
pub struct RemoteExpert {
    cfg: RemoteExpertConfig,
    api_key: Option<String>,
    cache: ContentCache,
    client: reqwest::blocking::Client,
}

impl RemoteExpert {
    /// Reads the API key from `L2DCD_EXPERT_API_KEY`.
    pub fn new(cfg: RemoteExpertConfig) -> Result<Self, ExpertError> {
        Self::with_api_key(cfg, api_key_from_env())
    }

    pub fn with_api_key(cfg: RemoteExpertConfig, api_key: Option<String>) -> Result<Self, ExpertError> {
        cfg.validate()?;
        Ok(Self {
            cache: ContentCache::new(cfg.cache_dir.clone()),
            client: http_client(cfg.timeout_s),
            api_key,
            cfg,
        })
    }

    pub fn config(&self) -> &RemoteExpertConfig {
        &self.cfg
    }

    pub fn cache(&self) -> &ContentCache {
        &self.cache
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.cfg.seed = seed;
        out
    }

    pub fn request_hash(&self, description: &str) -> String {
        content_key(&[&self.cfg.model_name, &self.cfg.seed.to_string(), description])
    }

    pub fn predict<T: Real>(&self, pair: &CausalPair<T>) -> Result<ExpertPrediction, ExpertError> {
        let (system, user) = build_prompt(&pair.description)?;
        let key = self.request_hash(&pair.description);
        if let Some(hit) = self.cache.get::<CachedAnswer>(&key) {
            return Ok(ExpertPrediction {
                pair_id: pair.id,
                direction: hit.direction,
                raw_answer: Some(hit.raw_response),
            });
        }
        let api_key = self.api_key.as_deref().ok_or(ExpertError::AuthMissing)?;
        let body = json!({
            "model": self.cfg.model_name,
            "seed": self.cfg.seed,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });

        let mut last_err = None;
        for _ in 0..ATTEMPTS {
            let content = match post_json(&self.client, &self.cfg.endpoint_url, api_key, &body)
                .and_then(|v| message_content(&v))
            {
                Ok(c) => c,
                Err(e) => {
                    last_err = Some(ExpertError::Transport(e));
                    continue;
                }
            };
            match parse_answer(&content) {
                Ok(direction) => {
                    self.cache.put(
                        &key,
                        &CachedAnswer {
                            request_hash: key.clone(),
                            model: self.cfg.model_name.clone(),
                            seed: self.cfg.seed,
                            raw_response: content.clone(),
                            direction,
                        },
                    )?;
                    return Ok(ExpertPrediction {
                        pair_id: pair.id,
                        direction,
                        raw_answer: Some(content),
                    });
                }
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.expect("at least one attempt"))
    }
}

fn message_content(v: &serde_json::Value) -> Result<String, TransportError> {
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_owned)
        .ok_or_else(|| TransportError::Decode("missing choices[0].message.content".into()))
}

/// One-shot convenience over [`RemoteExpert`].
pub fn remote_predict<T: Real>(
    cfg: &RemoteExpertConfig,
    pair: &CausalPair<T>,
) -> Result<ExpertPrediction, ExpertError> {
    RemoteExpert::new(cfg.clone())?.predict(pair)
}
