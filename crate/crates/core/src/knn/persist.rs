//! Index file. Reference vectors are not stored; the file records the
//! digest of the reference matrix it was built on and refuses any other.
//!
//! ```text
//! magic "IDX1" | mode u8 (0 exact, 1 ivf) | dim u32 | rows u64 | nprobe u32 |
//! centroids u32 | reference digest 16 ASCII hex bytes |
//! centroid data (centroids x dim f32) | assignments (rows x u32)
//! ```
//! All integers and floats little-endian.

use std::path::Path;

use super::{IndexMode, NeighborIndex};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"IDX1";
const HEADER_LEN: usize = 4 + 1 + 4 + 8 + 4 + 4 + 16;

pub fn encode_index(index: &NeighborIndex) -> Vec<u8> {
    let reference = index.reference();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(match index.mode() {
        IndexMode::Exact => 0,
        IndexMode::Ivf => 1,
    });
    out.extend_from_slice(&(reference.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(reference.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(index.nprobe() as u32).to_le_bytes());
    out.extend_from_slice(&(index.centroid_count() as u32).to_le_bytes());
    out.extend_from_slice(reference.digest().as_bytes());
    for v in index.centroids().unwrap_or(&[]) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for a in index.assignments().unwrap_or(&[]) {
        out.extend_from_slice(&a.to_le_bytes());
    }
    out
}

pub fn decode_index(bytes: &[u8], reference: EmbeddingMatrix) -> Result<NeighborIndex> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::SizeMismatch {
            what: "index header".into(),
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            expected: "IDX1".into(),
            found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
        });
    }
    let u32_at = |p: usize| u32::from_le_bytes(bytes[p..p + 4].try_into().unwrap()) as usize;
    let mode = bytes[4];
    let dim = u32_at(5);
    let rows = u64::from_le_bytes(bytes[9..17].try_into().unwrap()) as usize;
    let nprobe = u32_at(17);
    let c = u32_at(21);
    let digest = std::str::from_utf8(&bytes[25..41]).unwrap_or("");
    if dim != reference.dim() || rows != reference.rows() || digest != reference.digest() {
        return Err(Error::InvalidData(format!(
            "index was built for a different reference set ({rows} x {dim}, digest {digest})"
        )));
    }
    let (expected_c, expected_len) = match mode {
        0 => (0, HEADER_LEN),
        1 => (c, HEADER_LEN + c * dim * 4 + rows * 4),
        other => return Err(Error::InvalidData(format!("unknown index mode {other}"))),
    };
    if c != expected_c || bytes.len() != expected_len {
        return Err(Error::SizeMismatch {
            what: "index file".into(),
            expected: expected_len as u64,
            actual: bytes.len() as u64,
        });
    }
    if mode == 0 {
        return super::build_index(reference, &super::IndexConfig::default());
    }
    let cent_end = HEADER_LEN + c * dim * 4;
    let centroids = bytes[HEADER_LEN..cent_end]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let assignments = bytes[cent_end..]
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    NeighborIndex::from_parts(reference, centroids, assignments, nprobe)
}

pub fn save_index(index: &NeighborIndex, path: &Path) -> Result<()> {
    std::fs::write(path, encode_index(index)).map_err(|e| Error::io(path, e))
}

pub fn load_index(path: &Path, reference: EmbeddingMatrix) -> Result<NeighborIndex> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_index(&bytes, reference)
}
