//! On-disk cache of service embeddings keyed by (model name, text digest).
//!
//! Append-only file: magic `ECH1`, then records of
//! `u32 model_len | model | u64 text_hash | u32 dim | dim x f32`, all LE.
//! A torn final record (interrupted append) is ignored on load.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use xxhash_rust::xxh64::xxh64;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"ECH1";

pub fn text_key(text: &str) -> u64 {
    xxh64(text.as_bytes(), 0)
}

#[derive(Debug)]
pub struct EmbeddingCache {
    path: PathBuf,
    entries: HashMap<(String, u64), Vec<f32>>,
    pending: Vec<u8>,
}

impl EmbeddingCache {
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            if bytes.len() < 4 || &bytes[..4] != MAGIC {
                return Err(Error::BadMagic {
                    expected: "ECH1".into(),
                    found: String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned(),
                });
            }
            let mut pos = 4;
            while let Some((model, key, row, next)) = read_record(&bytes, pos) {
                entries.insert((model, key), row);
                pos = next;
            }
            if pos != bytes.len() {
                tracing::warn!(path = %path.display(), "dropping torn record at end of embedding cache");
                std::fs::OpenOptions::new()
                    .write(true)
                    .open(path)
                    .and_then(|f| f.set_len(pos as u64))
                    .map_err(|e| Error::io(path, e))?;
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
            pending: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cached vector for `text` under `model`, if its dimension is `dim`.
    pub fn get(&self, model: &str, text: &str, dim: usize) -> Option<&[f32]> {
        self.entries
            .get(&(model.to_string(), text_key(text)))
            .filter(|v| v.len() == dim)
            .map(Vec::as_slice)
    }

    pub fn insert(&mut self, model: &str, text: &str, row: Vec<f32>) {
        let key = text_key(text);
        let p = &mut self.pending;
        p.extend_from_slice(&(model.len() as u32).to_le_bytes());
        p.extend_from_slice(model.as_bytes());
        p.extend_from_slice(&key.to_le_bytes());
        p.extend_from_slice(&(row.len() as u32).to_le_bytes());
        for v in &row {
            p.extend_from_slice(&v.to_le_bytes());
        }
        self.entries.insert((model.to_string(), key), row);
    }

    /// Appends entries inserted since the last flush.
    pub fn flush(&mut self) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        if let Some(parent) = self.path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let fresh = !self.path.exists();
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        if fresh {
            f.write_all(MAGIC).map_err(|e| Error::io(&self.path, e))?;
        }
        f.write_all(&self.pending).map_err(|e| Error::io(&self.path, e))?;
        self.pending.clear();
        Ok(())
    }
}

fn read_record(bytes: &[u8], mut pos: usize) -> Option<(String, u64, Vec<f32>, usize)> {
    let take = |pos: &mut usize, n: usize| -> Option<&[u8]> {
        let s = bytes.get(*pos..*pos + n)?;
        *pos += n;
        Some(s)
    };
    let model_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().ok()?) as usize;
    let model = std::str::from_utf8(take(&mut pos, model_len)?).ok()?.to_string();
    let key = u64::from_le_bytes(take(&mut pos, 8)?.try_into().ok()?);
    let dim = u32::from_le_bytes(take(&mut pos, 4)?.try_into().ok()?) as usize;
    let row = take(&mut pos, dim.checked_mul(4)?)?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Some((model, key, row, pos))
}
