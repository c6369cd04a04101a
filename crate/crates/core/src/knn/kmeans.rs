//! k-means coarse quantizer: k-means++ seeding followed by Lloyd iterations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::distance::squared_l2;
use crate::embed::EmbeddingMatrix;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub dim: usize,
    /// `k x dim`, row-major.
    pub centroids: Vec<f32>,
    pub assignments: Vec<u32>,
    pub iterations: usize,
}

impl KMeans {
    pub fn k(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn centroid(&self, c: usize) -> &[f32] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }
}

/// Index of the nearest centroid, ties to the smaller index.
pub(crate) fn nearest_centroid(centroids: &[f32], dim: usize, v: &[f32]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cent) in centroids.chunks_exact(dim).enumerate() {
        let d = squared_l2(cent, v);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(data: &EmbeddingMatrix, centroids: &[f32]) -> Vec<u32> {
    let dim = data.dim();
    (0..data.rows())
        .into_par_iter()
        .map(|i| nearest_centroid(centroids, dim, data.row(i)).0 as u32)
        .collect()
}

/// Caller guarantees `1 <= k <= data.rows()`.
pub fn kmeans(data: &EmbeddingMatrix, k: usize, seed: u64, max_iterations: usize, tolerance: f64) -> KMeans {
    let n = data.rows();
    let dim = data.dim();
    assert!(k >= 1 && k <= n, "k={k} must be in 1..={n}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding.
    let mut chosen = vec![rng.random_range(0..n)];
    let mut min_d: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| squared_l2(data.row(i), data.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = min_d.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in min_d.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`.
            pick.unwrap_or_else(|| min_d.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            // Every row coincides with a chosen centroid; take unused rows in order.
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        let c = data.row(next);
        min_d.par_iter_mut().enumerate().for_each(|(i, d)| {
            *d = d.min(squared_l2(data.row(i), c));
        });
    }
    let mut centroids: Vec<f32> = chosen.iter().flat_map(|&i| data.row(i).iter().copied()).collect();

    let mut assignments = assign(data, &centroids);
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            let a = a as usize;
            counts[a] += 1;
            for (s, &v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(data.row(i)) {
                *s += v as f64;
            }
        }
        let mut movement = 0.0f64;
        for c in 0..k {
            // Empty clusters keep their previous centroid.
            if counts[c] == 0 {
                continue;
            }
            let updated: Vec<f32> = sums[c * dim..(c + 1) * dim]
                .iter()
                .map(|s| (s / counts[c] as f64) as f32)
                .collect();
            let old = &mut centroids[c * dim..(c + 1) * dim];
            movement = movement.max(squared_l2(old, &updated).sqrt());
            old.copy_from_slice(&updated);
        }
        assignments = assign(data, &centroids);
        if movement < tolerance {
            break;
        }
    }

    KMeans {
        dim,
        centroids,
        assignments,
        iterations,
    }
}
