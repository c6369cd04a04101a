//! Binary embedding file.
//!
//! ```text
//! magic     4 bytes   "EMB1"
//! dim       u32 LE
//! rows      u64 LE
//! flag      u8        1 if rows are L2-normalized
//! data      rows*dim  f32 LE, row-major
//! ids       rows x (u32 LE byte length, UTF-8 bytes), in row order
//! ```

use std::io::Write;
use std::path::Path;

use super::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: u64 = 4 + 4 + 8 + 1;

pub fn encode_embeddings(m: &EmbeddingMatrix) -> Vec<u8> {
    let id_bytes: usize = m.ids().iter().map(|id| 4 + id.len()).sum();
    let mut out = Vec::with_capacity(HEADER_LEN as usize + m.data().len() * 4 + id_bytes);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.push(m.normalized() as u8);
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for id in m.ids() {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    out
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let actual = bytes.len() as u64;
    if actual < HEADER_LEN {
        return Err(Error::SizeMismatch {
            what: "embedding header".into(),
            expected: HEADER_LEN,
            actual,
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            expected: String::from_utf8_lossy(MAGIC).into_owned(),
            found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
        });
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as u64;
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let normalized = match bytes[16] {
        0 => false,
        1 => true,
        other => return Err(Error::InvalidData(format!("normalized flag {other} is not 0 or 1"))),
    };
    if dim == 0 {
        return Err(Error::InvalidData("embedding dimension is 0".into()));
    }

    // Data plus the smallest possible id table (all length prefixes).
    let minimum = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .and_then(|n| n.checked_add(rows.checked_mul(4)?))
        .ok_or_else(|| Error::InvalidData(format!("declared shape {rows} x {dim} overflows")))?;
    if actual < minimum {
        return Err(Error::SizeMismatch {
            what: format!("embedding file ({rows} rows x {dim} dims)"),
            expected: minimum,
            actual,
        });
    }

    let data_end = (HEADER_LEN + rows * dim * 4) as usize;
    let data: Vec<f32> = bytes[HEADER_LEN as usize..data_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let mut ids = Vec::with_capacity(rows as usize);
    let mut pos = data_end;
    for row in 0..rows {
        let needed = |pos: usize, extra: u64| Error::SizeMismatch {
            what: format!("id table at row {row}"),
            expected: pos as u64 + extra,
            actual,
        };
        if pos + 4 > bytes.len() {
            return Err(needed(pos, 4));
        }
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        if pos + len > bytes.len() {
            return Err(needed(pos, len as u64));
        }
        let id = std::str::from_utf8(&bytes[pos..pos + len])
            .map_err(|_| Error::InvalidData(format!("id at row {row} is not UTF-8")))?;
        ids.push(id.to_string());
        pos += len;
    }
    if pos != bytes.len() {
        return Err(Error::SizeMismatch {
            what: "embedding file (trailing bytes)".into(),
            expected: pos as u64,
            actual,
        });
    }
    EmbeddingMatrix::new(dim as usize, ids, data, normalized)
}

pub fn save_embeddings(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_embeddings(m)).map_err(|e| Error::io(path, e))
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embeddings(&bytes)
}
