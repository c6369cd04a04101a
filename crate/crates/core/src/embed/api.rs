//! HTTP client for an external embedding service.
//!
//! Request: `POST <endpoint>` with `{"model": ..., "input": [texts]}`.
//! Response: either a bare array `[{"embedding": [...]}, ...]` or an object
//! wrapping that array under `data`. When items carry an `index` field they
//! are reordered by it.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApiConfig {
    pub endpoint: String,
    pub model_name: String,
    /// Environment variable holding the bearer token; no auth header when unset.
    pub api_key_env: Option<String>,
    pub batch_size: usize,
    pub max_retries: usize,
    pub backoff_ms: u64,
    pub concurrency: usize,
    pub timeout_secs: u64,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/embeddings".into(),
            model_name: "text-embedding-ada-002".into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
            batch_size: 64,
            max_retries: 3,
            backoff_ms: 500,
            concurrency: 4,
            timeout_secs: 60,
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct Item {
    embedding: Vec<f32>,
    #[serde(default)]
    index: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Response {
    Bare(Vec<Item>),
    Wrapped { data: Vec<Item> },
}

/// One failed attempt. `row` is the offending position within the batch
/// when the failure is specific to one input.
#[derive(Debug)]
pub(crate) struct AttemptError {
    pub row: Option<usize>,
    pub detail: String,
}

pub(crate) struct ApiClient {
    agent: ureq::Agent,
    config: ApiConfig,
    token: Option<String>,
    dim: usize,
}

impl ApiClient {
    pub fn new(config: &ApiConfig, dim: usize) -> Result<Self> {
        let token = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::param(format!(
                    "environment variable {var} with the embedding API token is not set"
                ))
            })?),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .build()
            .new_agent();
        Ok(Self {
            agent,
            config: config.clone(),
            token,
            dim,
        })
    }

    fn attempt(&self, texts: &[&str]) -> std::result::Result<Vec<Vec<f32>>, AttemptError> {
        let fail = |row, detail: String| AttemptError { row, detail };
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req
            .send_json(Request {
                model: &self.config.model_name,
                input: texts,
            })
            .map_err(|e| fail(None, e.to_string()))?;
        let parsed: Response = resp
            .body_mut()
            .read_json()
            .map_err(|e| fail(None, format!("unreadable response: {e}")))?;
        let mut items = match parsed {
            Response::Bare(items) | Response::Wrapped { data: items } => items,
        };
        if items.len() != texts.len() {
            return Err(fail(
                None,
                format!("sent {} inputs, received {} embeddings", texts.len(), items.len()),
            ));
        }
        if items.iter().all(|it| it.index.is_some()) {
            items.sort_by_key(|it| it.index);
        }
        for (row, it) in items.iter().enumerate() {
            if it.embedding.len() != self.dim {
                return Err(fail(
                    Some(row),
                    format!("embedding has dimension {}, expected {}", it.embedding.len(), self.dim),
                ));
            }
            if it.embedding.iter().any(|v| !v.is_finite()) {
                return Err(fail(Some(row), "embedding contains non-finite values".into()));
            }
        }
        Ok(items.into_iter().map(|it| it.embedding).collect())
    }

    /// Sends one batch, retrying with exponential backoff. `ids` name the
    /// batch's samples for error reporting.
    pub fn embed_batch(&self, texts: &[&str], ids: &[&str]) -> Result<Vec<Vec<f32>>> {
        let attempts = self.config.max_retries + 1;
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(texts) {
                Ok(rows) => return Ok(rows),
                Err(e) => {
                    tracing::warn!(
                        attempt = attempt + 1,
                        attempts,
                        first_id = ids.first().copied().unwrap_or(""),
                        "embedding request failed: {}",
                        e.detail
                    );
                    last = Some(e);
                }
            }
        }
        let last = last.expect("at least one attempt");
        let sample_id = ids[last.row.unwrap_or(0).min(ids.len() - 1)].to_string();
        Err(Error::External {
            sample_id,
            attempts,
            detail: last.detail,
        })
    }
}
