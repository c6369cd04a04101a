//! Percentile-threshold subset selection over nearest-neighbor distances.
//!
//! Given distances `d_1..d_N` and a fraction `phi`, the threshold is
//! `sorted[min(floor(phi * N), N - 1)]` and every record at or below it is
//! selected. Ties at the threshold are all kept, so the subset can exceed
//! `floor(phi * N)`.

mod file;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use file::{parse_subset, read_subset_file, render_subset, write_subset_file};

use crate::dataset::{save_corpus, Corpus};
use crate::digest::Digester;
use crate::error::{Error, Result};
use crate::knn::DistanceRecord;

/// Threshold recorded when no distance threshold applies (random subsets and
/// `phi = 0`).
pub const NO_THRESHOLD: f64 = -1.0;

/// Share of a subset held out for validation when it is split.
pub const VALIDATION_SHARE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionManifest {
    /// Percentile for curated subsets, sampling fraction for random ones.
    pub phi: f64,
    pub threshold: f64,
    pub selected_count: usize,
    pub total_count: usize,
    pub unrealistic_digest: Option<String>,
    pub realworld_digest: Option<String>,
    /// Digest of the distance records in query-id order (see
    /// [`distance_digest`]); absent for random subsets.
    pub distance_digest: Option<String>,
    pub random: bool,
    pub seed: Option<u64>,
    pub seed_independent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSpec {
    pub manifest: SelectionManifest,
    pub selected_ids: Vec<String>,
}

impl SubsetSpec {
    /// Records the digests of the corpora the distances were computed from.
    pub fn with_corpus_digests(mut self, unrealistic: &str, realworld: &str) -> Self {
        self.manifest.unrealistic_digest = Some(unrealistic.to_string());
        self.manifest.realworld_digest = Some(realworld.to_string());
        self
    }
}

/// `floor(fraction * n)`, absorbing floating-point error just below an
/// integer so that e.g. `0.29 * 100` counts 29.
pub fn fraction_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let nearest = x.round();
    let count = if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        x.floor()
    };
    (count.max(0.0) as usize).min(n)
}

fn check_fraction(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::param(format!("{name} {value} outside [0, 1]")));
    }
    Ok(())
}

/// Indices of `records` ordered by (distance, query id).
fn canonical_order(records: &[DistanceRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&records[a], &records[b]);
        ra.distance
            .total_cmp(&rb.distance)
            .then_with(|| ra.query_id.cmp(&rb.query_id))
    });
    order
}

fn validate_records(records: &[DistanceRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyInput("distance records"));
    }
    let mut seen = HashSet::with_capacity(records.len());
    for r in records {
        if !(r.distance >= 0.0 && r.distance.is_finite()) {
            return Err(Error::InvalidData(format!(
                "distance {} for {} is not a finite non-negative value",
                r.distance, r.query_id
            )));
        }
        if !seen.insert(r.query_id.as_str()) {
            return Err(Error::InvalidData(format!("query id {} appears twice", r.query_id)));
        }
    }
    Ok(())
}

/// Digest over the records sorted by query id, hashing each distance's exact
/// bits. Independent of input order.
pub fn distance_digest(records: &[DistanceRecord]) -> String {
    let mut sorted: Vec<&DistanceRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    let mut h = Digester::new();
    for r in sorted {
        h.update(r.query_id.as_bytes());
        h.update(&[0]);
        h.update(r.neighbor_id.as_bytes());
        h.update(&[0]);
        h.update(&r.distance.to_le_bytes());
    }
    h.finish()
}

/// Distances in ascending order, for auditing the threshold.
pub fn sorted_distances(records: &[DistanceRecord]) -> Vec<f64> {
    let mut d: Vec<f64> = records.iter().map(|r| r.distance).collect();
    d.sort_by(f64::total_cmp);
    d
}

pub fn select_subset(records: &[DistanceRecord], phi: f64) -> Result<SubsetSpec> {
    check_fraction("phi", phi)?;
    validate_records(records)?;
    let n = records.len();
    let order = canonical_order(records);

    let (threshold, selected) = if phi == 0.0 {
        (NO_THRESHOLD, 0)
    } else {
        let k = fraction_count(phi, n).min(n - 1);
        let threshold = records[order[k]].distance;
        let selected = order.partition_point(|&i| records[i].distance <= threshold);
        (threshold, selected)
    };

    Ok(SubsetSpec {
        manifest: SelectionManifest {
            phi,
            threshold,
            selected_count: selected,
            total_count: n,
            unrealistic_digest: None,
            realworld_digest: None,
            distance_digest: Some(distance_digest(records)),
            random: false,
            seed: None,
            seed_independent: true,
        },
        selected_ids: order[..selected].iter().map(|&i| records[i].query_id.clone()).collect(),
    })
}

/// Uniform sample of `floor(fraction * N)` ids without replacement.
pub fn random_subset(corpus: &Corpus, fraction: f64, seed: u64) -> Result<SubsetSpec> {
    check_fraction("fraction", fraction)?;
    let mut spec = random_subset_of_size(corpus, fraction_count(fraction, corpus.len()), seed)?;
    spec.manifest.phi = fraction;
    Ok(spec)
}

/// Uniform sample of exactly `size` ids, listed in corpus order.
pub fn random_subset_of_size(corpus: &Corpus, size: usize, seed: u64) -> Result<SubsetSpec> {
    let n = corpus.len();
    if size > n {
        return Err(Error::param(format!("cannot sample {size} of {n} samples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, size).into_vec();
    picked.sort_unstable();
    let ids = picked.into_iter().map(|i| corpus.samples()[i].id.clone()).collect();
    Ok(SubsetSpec {
        manifest: SelectionManifest {
            phi: if n == 0 { 0.0 } else { size as f64 / n as f64 },
            threshold: NO_THRESHOLD,
            selected_count: size,
            total_count: n,
            unrealistic_digest: Some(corpus.manifest().content_digest.clone()),
            realworld_digest: None,
            distance_digest: None,
            random: true,
            seed: Some(seed),
            seed_independent: false,
        },
        selected_ids: ids,
    })
}

/// Train/validation partition of `ids`: `floor(0.02 * n)` validation ids
/// (leaving at least one for training), chosen by a seeded shuffle. Both
/// parts keep the input order.
pub fn split_ids<S: AsRef<str>>(ids: &[S], seed: u64) -> (Vec<String>, Vec<String>) {
    let n = ids.len();
    let val = fraction_count(VALIDATION_SHARE, n).min(n.saturating_sub(1));
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_val = vec![false; n];
    for &p in &positions[..val] {
        is_val[p] = true;
    }
    let (mut train, mut validation) = (Vec::new(), Vec::new());
    for (id, v) in ids.iter().zip(is_val) {
        if v {
            validation.push(id.as_ref().to_string());
        } else {
            train.push(id.as_ref().to_string());
        }
    }
    (train, validation)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedSubset {
    pub corpus: PathBuf,
    pub spec: PathBuf,
    pub train: Option<PathBuf>,
    pub validation: Option<PathBuf>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Writes the selected samples (in spec order) to `path`, the spec itself to
/// `<stem>.subset`, and with `split_seed` also `<stem>.train.jsonl` and
/// `<stem>.val.jsonl`.
pub fn emit_subset(corpus: &Corpus, spec: &SubsetSpec, path: &Path, split_seed: Option<u64>) -> Result<EmittedSubset> {
    let selected = corpus.subset(&spec.selected_ids)?;
    save_corpus(&selected, path)?;
    let spec_path = sibling(path, ".subset");
    write_subset_file(spec, &spec_path)?;

    let mut out = EmittedSubset {
        corpus: path.to_path_buf(),
        spec: spec_path,
        train: None,
        validation: None,
    };
    if let Some(seed) = split_seed {
        let (train, validation) = split_ids(&spec.selected_ids, seed);
        let train_path = sibling(path, ".train.jsonl");
        let val_path = sibling(path, ".val.jsonl");
        save_corpus(&corpus.subset(&train)?, &train_path)?;
        save_corpus(&corpus.subset(&validation)?, &val_path)?;
        out.train = Some(train_path);
        out.validation = Some(val_path);
    }
    Ok(out)
}
