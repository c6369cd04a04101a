//! Embedding gateway: turns corpora into fixed-dimension vectors, either
//! through an external embedding service or the built-in hashing embedder,
//! and persists them in the `EMB1` binary format.

mod api;
mod cache;
mod format;
mod matrix;
mod mock;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use api::ApiConfig;
pub use cache::{text_key, EmbeddingCache};
pub use format::{decode_embeddings, encode_embeddings, load_embeddings, save_embeddings, MAGIC};
pub use matrix::{l2_normalize, EmbeddingMatrix};
pub use mock::{bucket_of, mock_embed, sign_of, BUCKET_SEED, SIGN_SEED};

use crate::dataset::{truncate_to_tokens, Corpus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Backend {
    MockHash,
    ExternalApi(ApiConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderConfig {
    pub backend: Backend,
    pub dim: usize,
    /// Inputs longer than this many tokens are truncated before embedding.
    pub max_tokens: usize,
    pub normalize: bool,
}

impl EmbedderConfig {
    pub fn mock(dim: usize) -> Self {
        Self {
            backend: Backend::MockHash,
            dim,
            max_tokens: 8191,
            normalize: false,
        }
    }

    /// Service profile with 1536-dimensional output and an 8191-token cap.
    pub fn external(api: ApiConfig) -> Self {
        Self {
            backend: Backend::ExternalApi(api),
            dim: 1536,
            max_tokens: 8191,
            normalize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::param(format!("embedding dim must be >= 2, got {}", self.dim)));
        }
        if self.max_tokens < 1 {
            return Err(Error::param("max_tokens must be >= 1"));
        }
        if let Backend::ExternalApi(api) = &self.backend {
            if api.batch_size == 0 || api.concurrency == 0 {
                return Err(Error::param("batch_size and concurrency must be >= 1"));
            }
            if api.model_name.is_empty() || api.endpoint.is_empty() {
                return Err(Error::param("external backend needs endpoint and model_name"));
            }
        }
        Ok(())
    }
}

/// Embeds every sample of `corpus`, one row per sample in corpus order.
pub fn embed_corpus(corpus: &Corpus, config: &EmbedderConfig) -> Result<EmbeddingMatrix> {
    embed_corpus_with_cache(corpus, config, None)
}

/// As [`embed_corpus`]; service responses are looked up in and added to
/// `cache` (keyed by model name and truncated text). The mock backend
/// ignores the cache.
pub fn embed_corpus_with_cache(
    corpus: &Corpus,
    config: &EmbedderConfig,
    cache: Option<&mut EmbeddingCache>,
) -> Result<EmbeddingMatrix> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyInput("cannot embed an empty corpus"));
    }

    let texts: Vec<&str> = corpus
        .samples()
        .iter()
        .map(|s| {
            let (text, cut) = truncate_to_tokens(&s.text, config.max_tokens);
            if cut {
                tracing::info!(id = %s.id, max_tokens = config.max_tokens, "truncated over-long input");
            }
            text
        })
        .collect();
    let ids: Vec<String> = corpus.ids().map(str::to_string).collect();

    let rows = match &config.backend {
        Backend::MockHash => texts.par_iter().map(|t| mock_embed(t, config.dim, false)).collect(),
        Backend::ExternalApi(api) => embed_external(&ids, &texts, api, config.dim, cache)?,
    };
    EmbeddingMatrix::from_rows(config.dim, ids, rows, config.normalize)
}

fn embed_external(
    ids: &[String],
    texts: &[&str],
    api: &ApiConfig,
    dim: usize,
    mut cache: Option<&mut EmbeddingCache>,
) -> Result<Vec<Vec<f32>>> {
    let mut rows: Vec<Option<Vec<f32>>> = texts
        .iter()
        .map(|t| {
            cache
                .as_ref()
                .and_then(|c| c.get(&api.model_name, t, dim))
                .map(<[f32]>::to_vec)
        })
        .collect();
    let missing: Vec<usize> = (0..texts.len()).filter(|&i| rows[i].is_none()).collect();
    if missing.is_empty() {
        return Ok(rows.into_iter().map(Option::unwrap).collect());
    }

    let client = api::ApiClient::new(api, dim)?;
    let batches: Vec<&[usize]> = missing.chunks(api.batch_size).collect();
    type Slot = Option<Result<Vec<Vec<f32>>>>;
    let results: Mutex<Vec<Slot>> = Mutex::new((0..batches.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let failed = std::sync::atomic::AtomicBool::new(false);

    std::thread::scope(|scope| {
        for _ in 0..api.concurrency.min(batches.len()) {
            scope.spawn(|| loop {
                let b = next.fetch_add(1, Ordering::Relaxed);
                if b >= batches.len() || failed.load(Ordering::Relaxed) {
                    break;
                }
                let batch_texts: Vec<&str> = batches[b].iter().map(|&i| texts[i]).collect();
                let batch_ids: Vec<&str> = batches[b].iter().map(|&i| ids[i].as_str()).collect();
                let out = client.embed_batch(&batch_texts, &batch_ids);
                if out.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                results.lock().unwrap()[b] = Some(out);
            });
        }
    });

    // Successful batches are cached even when another batch failed, so a
    // rerun only repeats the failed work.
    let mut first_error = None;
    for (batch, result) in batches.iter().zip(results.into_inner().unwrap()) {
        match result {
            Some(Ok(vectors)) => {
                for (&i, v) in batch.iter().zip(vectors) {
                    if let Some(c) = cache.as_deref_mut() {
                        c.insert(&api.model_name, texts[i], v.clone());
                    }
                    rows[i] = Some(v);
                }
            }
            Some(Err(e)) => {
                first_error.get_or_insert(e);
            }
            None => {}
        }
    }
    if let Some(c) = cache {
        c.flush()?;
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    Ok(rows.into_iter().map(|r| r.expect("every batch completed")).collect())
}
