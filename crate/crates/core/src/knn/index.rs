use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance::squared_l2;
use super::kmeans::kmeans;
use super::DistanceRecord;
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};

const QUERY_BLOCK: usize = 32;
const REF_BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexMode {
    Exact,
    Ivf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexConfig {
    pub mode: IndexMode,
    /// Centroid count for IVF; `None` means `ceil(sqrt(rows))`.
    pub centroids: Option<usize>,
    pub nprobe: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Lloyd iterations stop once no centroid moves this far.
    pub tolerance: f64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            mode: IndexMode::Exact,
            centroids: None,
            nprobe: 8,
            seed: 0,
            max_iterations: 25,
            tolerance: 1e-4,
        }
    }
}

impl IndexConfig {
    pub fn ivf() -> Self {
        Self {
            mode: IndexMode::Ivf,
            ..Self::default()
        }
    }
}

pub fn default_centroid_count(rows: usize) -> usize {
    ((rows as f64).sqrt().ceil() as usize).clamp(1, rows.max(1))
}

#[derive(Debug, Clone)]
struct Ivf {
    centroids: Vec<f32>,
    assignments: Vec<u32>,
    /// Posting list `c` is `list_rows[offsets[c]..offsets[c + 1]]`, ascending.
    offsets: Vec<usize>,
    list_rows: Vec<u32>,
    /// Reference vectors laid out in posting-list order.
    packed: Vec<f32>,
    nprobe: usize,
}

/// Nearest-neighbor index over a reference matrix. Immutable once built and
/// safe to query from any number of threads.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    reference: EmbeddingMatrix,
    ivf: Option<Ivf>,
}

pub fn build_index(reference: EmbeddingMatrix, config: &IndexConfig) -> Result<NeighborIndex> {
    if reference.is_empty() {
        return Err(Error::EmptyInput("reference set for the neighbor index"));
    }
    match config.mode {
        IndexMode::Exact => Ok(NeighborIndex { reference, ivf: None }),
        IndexMode::Ivf => {
            let rows = reference.rows();
            let c = config.centroids.unwrap_or_else(|| default_centroid_count(rows));
            if c == 0 || c > rows {
                return Err(Error::param(format!("centroid count {c} must be in 1..={rows}")));
            }
            if config.nprobe == 0 {
                return Err(Error::param("nprobe must be >= 1"));
            }
            let km = kmeans(&reference, c, config.seed, config.max_iterations, config.tolerance);
            tracing::debug!(centroids = c, iterations = km.iterations, "built IVF quantizer");
            NeighborIndex::from_parts(reference, km.centroids, km.assignments, config.nprobe)
        }
    }
}

impl NeighborIndex {
    /// Reassembles an IVF index from its quantizer. `nprobe` is clamped to the
    /// centroid count.
    pub fn from_parts(
        reference: EmbeddingMatrix,
        centroids: Vec<f32>,
        assignments: Vec<u32>,
        nprobe: usize,
    ) -> Result<Self> {
        let dim = reference.dim();
        if centroids.is_empty() || !centroids.len().is_multiple_of(dim) {
            return Err(Error::InvalidData(format!(
                "{} centroid values do not form rows of dim {dim}",
                centroids.len()
            )));
        }
        let c = centroids.len() / dim;
        if assignments.len() != reference.rows() {
            return Err(Error::InvalidData(format!(
                "{} assignments for {} reference rows",
                assignments.len(),
                reference.rows()
            )));
        }
        if let Some(bad) = assignments.iter().find(|&&a| a as usize >= c) {
            return Err(Error::InvalidData(format!(
                "assignment {bad} exceeds centroid count {c}"
            )));
        }
        if nprobe == 0 {
            return Err(Error::param("nprobe must be >= 1"));
        }

        let mut offsets = vec![0usize; c + 1];
        for &a in &assignments {
            offsets[a as usize + 1] += 1;
        }
        for i in 0..c {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut list_rows = vec![0u32; assignments.len()];
        for (row, &a) in assignments.iter().enumerate() {
            list_rows[cursor[a as usize]] = row as u32;
            cursor[a as usize] += 1;
        }
        let packed = list_rows
            .iter()
            .flat_map(|&r| reference.row(r as usize).iter().copied())
            .collect();

        Ok(Self {
            reference,
            ivf: Some(Ivf {
                centroids,
                assignments,
                offsets,
                list_rows,
                packed,
                nprobe: nprobe.min(c),
            }),
        })
    }

    pub fn mode(&self) -> IndexMode {
        if self.ivf.is_some() {
            IndexMode::Ivf
        } else {
            IndexMode::Exact
        }
    }

    pub fn reference(&self) -> &EmbeddingMatrix {
        &self.reference
    }

    pub fn dim(&self) -> usize {
        self.reference.dim()
    }

    /// 0 for exact indexes.
    pub fn centroid_count(&self) -> usize {
        self.ivf.as_ref().map_or(0, |ivf| ivf.offsets.len() - 1)
    }

    pub fn nprobe(&self) -> usize {
        self.ivf.as_ref().map_or(0, |ivf| ivf.nprobe)
    }

    pub fn centroids(&self) -> Option<&[f32]> {
        self.ivf.as_ref().map(|ivf| ivf.centroids.as_slice())
    }

    pub fn assignments(&self) -> Option<&[u32]> {
        self.ivf.as_ref().map(|ivf| ivf.assignments.as_slice())
    }

    /// Reference row indices of each posting list.
    pub fn posting_lists(&self) -> Vec<&[u32]> {
        match &self.ivf {
            Some(ivf) => ivf.offsets.windows(2).map(|w| &ivf.list_rows[w[0]..w[1]]).collect(),
            None => Vec::new(),
        }
    }

    /// One record per query row, in query order. Ties go to the smaller
    /// reference row index.
    pub fn nearest(&self, queries: &EmbeddingMatrix) -> Result<Vec<DistanceRecord>> {
        self.nearest_with_nprobe(queries, self.nprobe())
    }

    /// As [`nearest`](Self::nearest) with an explicit probe count (clamped to
    /// the centroid count; ignored by exact indexes).
    pub fn nearest_with_nprobe(&self, queries: &EmbeddingMatrix, nprobe: usize) -> Result<Vec<DistanceRecord>> {
        if queries.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: queries.dim(),
            });
        }
        let hits = match &self.ivf {
            None => self.exact_search(queries),
            Some(ivf) => {
                if nprobe == 0 {
                    return Err(Error::param("nprobe must be >= 1"));
                }
                let nprobe = nprobe.min(ivf.offsets.len() - 1);
                (0..queries.rows())
                    .into_par_iter()
                    .map(|i| self.ivf_search(ivf, queries.row(i), nprobe))
                    .collect()
            }
        };
        Ok(hits
            .into_iter()
            .zip(queries.ids())
            .map(|((row, sq), qid)| DistanceRecord {
                query_id: qid.clone(),
                neighbor_id: self.reference.ids()[row].clone(),
                distance: sq.sqrt(),
            })
            .collect())
    }

    /// Blocked brute force: a block of queries sweeps the reference in
    /// cache-sized tiles.
    fn exact_search(&self, queries: &EmbeddingMatrix) -> Vec<(usize, f64)> {
        let dim = self.dim();
        let n = self.reference.rows();
        let blocks: Vec<Vec<(usize, f64)>> = queries
            .data()
            .par_chunks(QUERY_BLOCK * dim)
            .map(|block| {
                let mut best = vec![(usize::MAX, f64::INFINITY); block.len() / dim];
                for start in (0..n).step_by(REF_BLOCK) {
                    let end = (start + REF_BLOCK).min(n);
                    for (q, b) in block.chunks_exact(dim).zip(best.iter_mut()) {
                        for r in start..end {
                            // Rows are visited in ascending order, so strict `<`
                            // keeps the smallest index among equal distances.
                            let d = squared_l2(q, self.reference.row(r));
                            if d < b.1 {
                                *b = (r, d);
                            }
                        }
                    }
                }
                best
            })
            .collect();
        blocks.into_iter().flatten().collect()
    }

    fn ivf_search(&self, ivf: &Ivf, q: &[f32], nprobe: usize) -> (usize, f64) {
        let dim = self.dim();
        let mut ranked: Vec<(f64, u32)> = ivf
            .centroids
            .chunks_exact(dim)
            .enumerate()
            .map(|(c, cent)| (squared_l2(cent, q), c as u32))
            .collect();
        ranked.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut best = (usize::MAX, f64::INFINITY);
        for (probed, &(_, c)) in ranked.iter().enumerate() {
            // Past the probe budget, keep going only while nothing was found
            // (all probed lists empty).
            if probed >= nprobe && best.0 != usize::MAX {
                break;
            }
            let (lo, hi) = (ivf.offsets[c as usize], ivf.offsets[c as usize + 1]);
            for k in lo..hi {
                let row = ivf.list_rows[k] as usize;
                let d = squared_l2(q, &ivf.packed[k * dim..(k + 1) * dim]);
                if d < best.1 || (d == best.1 && row < best.0) {
                    best = (row, d);
                }
            }
        }
        best
    }
}
