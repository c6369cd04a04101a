use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xxhash_rust::xxh64::xxh64;

use crate::dataset::CorpusKind;
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const PCA_TOLERANCE: f64 = 1e-6;
pub const PCA_MAX_ITERATIONS: usize = 500;

/// Second eigenvalue at or below this share of the total variance is treated
/// as absent.
const RANK_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection2D {
    pub ids: Vec<String>,
    pub sets: Vec<CorpusKind>,
    pub coords: Vec<[f64; 2]>,
    /// Share of the total variance along each axis, non-increasing.
    pub explained_variance: [f64; 2],
    /// The pooled sample spans fewer than two dimensions; `y` is all zeros.
    pub rank_deficient: bool,
}

/// Up to `cap` rows, chosen by ranking ids under a seeded hash. The choice
/// depends only on the ids, so it is unaffected by row order. Returned in id
/// order.
fn subsample(m: &EmbeddingMatrix, cap: usize, seed: u64) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..m.rows()).collect();
    if rows.len() > cap {
        rows.sort_by_key(|&i| (xxh64(m.ids()[i].as_bytes(), seed), &m.ids()[i]));
        rows.truncate(cap);
    }
    rows.sort_by(|&a, &b| m.ids()[a].cmp(&m.ids()[b]));
    rows
}

/// `C v` for `C = X^T X / n` without forming `C`.
fn cov_times(x: &[f64], n: usize, dim: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for row in x.chunks_exact(dim) {
        let p: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
        for (o, a) in out.iter_mut().zip(row) {
            *o += p * a;
        }
    }
    out.iter_mut().for_each(|o| *o /= n as f64);
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Leading eigenvector of `C` restricted to the complement of `orth`.
fn power_iteration(x: &[f64], n: usize, dim: usize, orth: Option<&[f64]>, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let project_out = |v: &mut Vec<f64>| {
        if let Some(u) = orth {
            let p = dot(v, u);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
        }
    };
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    project_out(&mut v);
    normalize(&mut v);

    for _ in 0..PCA_MAX_ITERATIONS {
        let mut next = cov_times(x, n, dim, &v);
        project_out(&mut next);
        if normalize(&mut next) == 0.0 {
            return (next, 0.0);
        }
        let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        v = next;
        if diff < PCA_TOLERANCE {
            break;
        }
    }
    let lambda = dot(&v, &cov_times(x, n, dim, &v)).max(0.0);
    (v, lambda)
}

/// Flip so that the largest-magnitude coordinate (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Two-dimensional PCA of a pooled sample of both embedding sets.
pub fn pca_project(u: &EmbeddingMatrix, r: &EmbeddingMatrix, per_set_cap: usize, seed: u64) -> Result<Projection2D> {
    if u.dim() != r.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            actual: r.dim(),
        });
    }
    if per_set_cap < 2 {
        return Err(Error::param("projection sample cap must be >= 2"));
    }
    let dim = u.dim();
    let mut ids = Vec::new();
    let mut sets = Vec::new();
    let mut x: Vec<f64> = Vec::new();
    for (m, kind) in [(u, CorpusKind::Unrealistic), (r, CorpusKind::Realworld)] {
        for i in subsample(m, per_set_cap, seed) {
            ids.push(m.ids()[i].clone());
            sets.push(kind);
            x.extend(m.row(i).iter().map(|&v| v as f64));
        }
    }
    let n = ids.len();
    if n == 0 {
        return Err(Error::EmptyInput("embeddings to project"));
    }

    let mut mean = vec![0.0; dim];
    for row in x.chunks_exact(dim) {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for row in x.chunks_exact_mut(dim) {
        row.iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
    }
    let trace = x.iter().map(|v| v * v).sum::<f64>() / n as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut v1, mut l1) = power_iteration(&x, n, dim, None, &mut rng);
    let (mut v2, mut l2) = power_iteration(&x, n, dim, Some(&v1), &mut rng);
    if l2 > l1 {
        std::mem::swap(&mut v1, &mut v2);
        std::mem::swap(&mut l1, &mut l2);
    }
    let rank_deficient = trace == 0.0 || l2 <= RANK_EPS * trace;
    if rank_deficient {
        tracing::warn!(
            rows = n,
            "projection sample has rank < 2 after centering; second axis set to zero"
        );
        v2.iter_mut().for_each(|x| *x = 0.0);
        l2 = 0.0;
    }
    fix_sign(&mut v1);
    fix_sign(&mut v2);

    let coords = x.chunks_exact(dim).map(|row| [dot(row, &v1), dot(row, &v2)]).collect();
    let explained_variance = if trace > 0.0 {
        [(l1 / trace).min(1.0), (l2 / trace).min(1.0)]
    } else {
        [0.0, 0.0]
    };
    Ok(Projection2D {
        ids,
        sets,
        coords,
        explained_variance,
        rank_deficient,
    })
}

pub fn write_projection_csv<W: Write>(p: &Projection2D, mut w: W) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidData(format!("writing projection: {e}"));
    writeln!(
        w,
        "# pca projection: {} points, explained_variance={},{}, rank_deficient={}",
        p.ids.len(),
        p.explained_variance[0],
        p.explained_variance[1],
        p.rank_deficient
    )
    .map_err(io)?;
    let mut csv = csv::Writer::from_writer(w);
    let cerr = |e: csv::Error| Error::InvalidData(format!("writing projection: {e}"));
    csv.write_record(["id", "set", "x", "y"]).map_err(cerr)?;
    for ((id, set), [x, y]) in p.ids.iter().zip(&p.sets).zip(&p.coords) {
        csv.write_record([id.as_str(), &set.to_string(), &x.to_string(), &y.to_string()])
            .map_err(cerr)?;
    }
    csv.flush().map_err(io)
}

pub fn save_projection(p: &Projection2D, path: &Path) -> Result<()> {
    super::write_with(path, |b| write_projection_csv(p, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn matrix(prefix: &str, dim: usize, data: Vec<f32>) -> EmbeddingMatrix {
        let ids = (0..data.len() / dim).map(|i| format!("{prefix}{i:05}")).collect();
        EmbeddingMatrix::new(dim, ids, data, false).unwrap()
    }

    fn gaussian(prefix: &str, rows: usize, dim: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        matrix(
            prefix,
            dim,
            (0..rows * dim).map(|_| StandardNormal.sample(&mut rng)).collect(),
        )
    }

    #[test]
    fn collinear_points_one_component() {
        let line: Vec<f32> = (0..50).flat_map(|i| [i as f32, i as f32]).collect();
        let p = pca_project(&matrix("u", 2, line.clone()), &matrix("r", 2, line), 100, 1).unwrap();
        assert!((p.explained_variance[0] - 1.0).abs() < 1e-6);
        assert!(p.rank_deficient);
        assert!(p.coords.iter().all(|c| c[1] == 0.0));
        assert_eq!(p.ids.len(), 100);
    }

    #[test]
    fn isotropic_cloud_balanced() {
        let p = pca_project(&gaussian("u", 1000, 2, 3), &gaussian("r", 1000, 2, 4), 1000, 5).unwrap();
        let ratio = p.explained_variance[0] / p.explained_variance[1];
        assert!((0.8..=1.25).contains(&ratio), "ratio {ratio}");
        assert!(p.explained_variance[0] >= p.explained_variance[1]);
        assert!((p.explained_variance[0] + p.explained_variance[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn anisotropic_cloud_finds_major_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<f32> = (0..500)
            .flat_map(|_| {
                let a: f32 = StandardNormal.sample(&mut rng);
                let b: f32 = StandardNormal.sample(&mut rng);
                let c: f32 = StandardNormal.sample(&mut rng);
                [5.0 * a, 2.0 * b, 0.1 * c]
            })
            .collect();
        let u = matrix("u", 3, data);
        let r = matrix("r", 3, vec![0.0; 3]);
        let p = pca_project(&u, &r, 1000, 1).unwrap();
        assert!(p.explained_variance[0] > 0.8 && p.explained_variance[1] > 0.1);
        // The first axis follows the x coordinate (ids sort in row order).
        let xs: Vec<f64> = u.iter_rows().map(|row| row[0] as f64).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (c, x) in p.coords.iter().zip(&xs) {
            sxy += c[0] * (x - mean);
            sxx += (x - mean).powi(2);
            syy += c[0] * c[0];
        }
        assert!(sxy.abs() / (sxx * syy).sqrt() > 0.99);
    }

    #[test]
    fn duplicated_points_same_components() {
        let u = gaussian("u", 200, 4, 1);
        let r = gaussian("r", 200, 4, 2);
        let base = pca_project(&u, &r, 1000, 7).unwrap();
        let dup = |m: &EmbeddingMatrix, p: &str| {
            let mut data = m.data().to_vec();
            data.extend_from_slice(m.data());
            matrix(p, 4, data)
        };
        let doubled = pca_project(&dup(&u, "u"), &dup(&r, "r"), 1000, 7).unwrap();
        for (i, id) in base.ids.iter().enumerate() {
            let j = doubled.ids.iter().position(|x| x == id).unwrap();
            for k in 0..2 {
                assert!((base.coords[i][k].abs() - doubled.coords[j][k].abs()).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn row_order_and_reruns_do_not_matter() {
        let u = gaussian("u", 300, 5, 1);
        let r = gaussian("r", 300, 5, 2);
        let a = pca_project(&u, &r, 100, 7).unwrap();
        assert_eq!(a, pca_project(&u, &r, 100, 7).unwrap());
        let reversed: Vec<usize> = (0..300).rev().collect();
        let b = pca_project(
            &u.select_rows(&reversed).unwrap(),
            &r.select_rows(&reversed).unwrap(),
            100,
            7,
        )
        .unwrap();
        assert_eq!(a.ids, b.ids);
        assert_eq!(a.coords, b.coords);
        assert_eq!(a.ids.len(), 200);
    }

    #[test]
    fn errors_and_csv() {
        let u = gaussian("u", 3, 2, 1);
        assert!(matches!(
            pca_project(&u, &gaussian("r", 3, 3, 1), 10, 1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(pca_project(&u, &u, 1, 1).is_err());
        let p = pca_project(&u, &gaussian("r", 2, 2, 2), 10, 1).unwrap();
        let mut buf = Vec::new();
        write_projection_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# pca projection: 5 points"));
        assert_eq!(lines[1], "id,set,x,y");
        assert!(lines[2].starts_with("u00000,unrealistic,"));
        assert!(lines[5].starts_with("r00000,realworld,"));
    }
}
