//! Content digests used in manifests and provenance records.
//!
//! All digests are XXH64 with seed 0, rendered as 16 lowercase hex digits.

use std::path::Path;

use xxhash_rust::xxh64::{xxh64, Xxh64};

use crate::error::{Error, Result};

pub fn digest_bytes(bytes: &[u8]) -> String {
    format!("{:016x}", xxh64(bytes, 0))
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(digest_bytes(&bytes))
}

/// Incremental variant of [`digest_bytes`]; feeding the same bytes in any
/// chunking yields the same digest.
#[derive(Default)]
pub struct Digester(Xxh64);

impl Digester {
    pub fn new() -> Self {
        Self(Xxh64::new(0))
    }

    pub fn update(&mut self, bytes: &[u8]) {
        self.0.update(bytes);
    }

    pub fn finish(&self) -> String {
        format!("{:016x}", self.0.digest())
    }
}
