use std::collections::HashMap;

use crate::dataset::Corpus;
use crate::digest::Digester;
use crate::error::{Error, Result};

/// Row-major `f32` embeddings keyed by sample id.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    normalized: bool,
    positions: HashMap<String, usize>,
}

impl PartialEq for EmbeddingMatrix {
    /// Bitwise comparison of the data, so `-0.0 != 0.0` here.
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.normalized == other.normalized
            && self.ids == other.ids
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f32>, normalized: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("embedding dimension must be positive"));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::InvalidData(format!(
                "{} ids x dim {dim} needs {} values, got {}",
                ids.len(),
                ids.len() * dim,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value in row {:?}",
                ids[pos / dim]
            )));
        }
        let mut positions = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if positions.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    id: id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Self {
            dim,
            ids,
            data,
            normalized,
            positions,
        })
    }

    /// Builds from rows, L2-normalizing each nonzero row when `normalize`.
    pub fn from_rows(dim: usize, ids: Vec<String>, rows: Vec<Vec<f32>>, normalize: bool) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (id, row) in ids.iter().zip(&rows) {
            if row.len() != dim {
                return Err(Error::InvalidData(format!(
                    "row {id:?} has {} values, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        if rows.len() != ids.len() {
            return Err(Error::InvalidData(format!("{} ids but {} rows", ids.len(), rows.len())));
        }
        if normalize {
            for row in data.chunks_exact_mut(dim) {
                l2_normalize(row);
            }
        }
        Self::new(dim, ids, data, normalize)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    /// New matrix holding rows `indices` in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut ids = Vec::with_capacity(indices.len());
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.rows() {
                return Err(Error::param(format!("row {i} out of range ({} rows)", self.rows())));
            }
            ids.push(self.ids[i].clone());
            data.extend_from_slice(self.row(i));
        }
        Self::new(self.dim, ids, data, self.normalized)
    }

    /// New matrix holding the rows named by `ids`, in that order.
    pub fn select_ids<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self> {
        let indices = ids
            .iter()
            .map(|id| {
                self.position(id.as_ref())
                    .ok_or_else(|| Error::UnknownId(id.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        self.select_rows(&indices)
    }

    /// Reorders rows to follow `corpus` order. Every corpus id must have a row;
    /// extra rows are dropped.
    pub fn aligned_to(&self, corpus: &Corpus) -> Result<Self> {
        let ids: Vec<&str> = corpus.ids().collect();
        self.select_ids(&ids)
    }

    /// Digest over dim, flag, ids and data bits.
    pub fn digest(&self) -> String {
        let mut d = Digester::new();
        d.update(&(self.dim as u64).to_le_bytes());
        d.update(&[self.normalized as u8]);
        for id in &self.ids {
            d.update(&(id.len() as u64).to_le_bytes());
            d.update(id.as_bytes());
        }
        for v in &self.data {
            d.update(&v.to_le_bytes());
        }
        d.finish()
    }
}

/// Scales `row` to unit L2 norm; zero rows are left untouched.
pub fn l2_normalize(row: &mut [f32]) {
    let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in row.iter_mut() {
            *v = (*v as f64 / norm) as f32;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("r{i}")).collect()
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(EmbeddingMatrix::new(0, vec![], vec![], false).is_err());
        assert!(EmbeddingMatrix::new(2, ids(2), vec![0.0; 3], false).is_err());
        assert!(EmbeddingMatrix::new(2, ids(1), vec![0.0, f32::NAN], false).is_err());
        assert!(EmbeddingMatrix::new(1, vec!["a".into(), "a".into()], vec![0.0; 2], false).is_err());
    }

    #[test]
    fn normalization_leaves_zero_rows() {
        let m = EmbeddingMatrix::from_rows(2, ids(2), vec![vec![3.0, 4.0], vec![0.0, 0.0]], true).unwrap();
        assert!(m.normalized());
        assert!((m.row(0)[0] - 0.6).abs() < 1e-7 && (m.row(0)[1] - 0.8).abs() < 1e-7);
        assert_eq!(m.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn select_and_position() {
        let m = EmbeddingMatrix::new(1, ids(3), vec![0.0, 1.0, 2.0], false).unwrap();
        let s = m.select_ids(&["r2", "r0"]).unwrap();
        assert_eq!(s.ids(), ["r2", "r0"]);
        assert_eq!(s.data(), &[2.0, 0.0]);
        assert_eq!(s.position("r0"), Some(1));
        assert!(m.select_ids(&["nope"]).is_err());
        assert_ne!(m.digest(), s.digest());
    }
}
