//! Controlled stand-in for an unrealistic corpus that partly overlaps a real
//! one.
//!
//! Real samples come from two unit-variance Gaussians centred at `-2 e0`
//! (clean) and `+2 e0` (defective). A `realistic_fraction` of the unrealistic
//! samples is drawn the same way; the rest come from a third Gaussian centred
//! at `12 e1`, labelled `x0 > 0` and then flipped with probability
//! `noise_label_rate`. The vectors themselves are the embeddings.
//!
//! Each sample's text spells its rounded coordinates as tokens
//! (`f3p2 f3p2 f3p2` for coordinate 3 near +2, `f0m1 f0m1` near -1), so the
//! hashing embedder also separates the clusters when run on these corpora.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Corpus, CorpusKind, Label, Sample};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::select::fraction_count;

pub const CLASS_OFFSET: f64 = 2.0;
pub const JUNK_OFFSET: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub n_real: usize,
    pub n_unreal: usize,
    pub realistic_fraction: f64,
    pub dim: usize,
    pub noise_label_rate: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_real: 1000,
            n_unreal: 5000,
            realistic_fraction: 0.3,
            dim: 32,
            noise_label_rate: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthBenchmark {
    pub real: Corpus,
    pub real_embeddings: EmbeddingMatrix,
    pub unreal: Corpus,
    pub unreal_embeddings: EmbeddingMatrix,
    /// Unrealistic ids drawn from the real distribution.
    pub realistic_ids: BTreeSet<String>,
}

fn coordinate_text(x: &[f32]) -> String {
    let mut words = Vec::new();
    for (j, v) in x.iter().enumerate() {
        let q = v.round() as i64;
        let word = format!("f{j}{}{}", if q < 0 { 'm' } else { 'p' }, q.unsigned_abs());
        for _ in 0..=q.unsigned_abs() {
            words.push(word.clone());
        }
    }
    words.join(" ")
}

fn class_sample(rng: &mut ChaCha8Rng, dim: usize) -> (Vec<f32>, Label) {
    let defective = rng.random_bool(0.5);
    let mut x: Vec<f32> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    x[0] += if defective {
        CLASS_OFFSET as f32
    } else {
        -CLASS_OFFSET as f32
    };
    (x, Label::from(defective))
}

fn junk_sample(rng: &mut ChaCha8Rng, dim: usize, noise: f64) -> (Vec<f32>, Label) {
    let mut x: Vec<f32> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    x[1] += JUNK_OFFSET as f32;
    let label = Label::from(x[0] > 0.0);
    let label = if rng.random_bool(noise) { label.flipped() } else { label };
    (x, label)
}

fn build(
    kind: CorpusKind,
    prefix: &str,
    dim: usize,
    rows: Vec<(Vec<f32>, Label)>,
) -> Result<(Corpus, EmbeddingMatrix)> {
    let ids: Vec<String> = (0..rows.len()).map(|i| format!("{prefix}{i:06}")).collect();
    let samples = rows
        .iter()
        .zip(&ids)
        .map(|((x, label), id)| Sample::new(id.clone(), coordinate_text(x), *label).with_source("synth"))
        .collect();
    let data = rows.into_iter().flat_map(|(x, _)| x).collect();
    Ok((
        Corpus::new(kind, samples)?,
        EmbeddingMatrix::new(dim, ids, data, false)?,
    ))
}

pub fn synth_benchmark(params: &SynthParams) -> Result<SynthBenchmark> {
    let SynthParams {
        n_real,
        n_unreal,
        realistic_fraction,
        dim,
        noise_label_rate,
        seed,
    } = *params;
    if !(0.0..=1.0).contains(&realistic_fraction) {
        return Err(Error::param(format!(
            "realistic fraction {realistic_fraction} outside [0, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&noise_label_rate) {
        return Err(Error::param(format!(
            "label noise rate {noise_label_rate} outside [0, 1]"
        )));
    }
    if dim < 2 {
        return Err(Error::param(format!("synthetic dim {dim} must be >= 2")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real_rows = (0..n_real).map(|_| class_sample(&mut rng, dim)).collect();
    let realistic_count = fraction_count(realistic_fraction, n_unreal);
    let mut realistic = vec![false; n_unreal];
    for i in rand::seq::index::sample(&mut rng, n_unreal, realistic_count) {
        realistic[i] = true;
    }
    let unreal_rows = realistic
        .iter()
        .map(|&r| {
            if r {
                class_sample(&mut rng, dim)
            } else {
                junk_sample(&mut rng, dim, noise_label_rate)
            }
        })
        .collect();

    let (real, real_embeddings) = build(CorpusKind::Realworld, "r", dim, real_rows)?;
    let (unreal, unreal_embeddings) = build(CorpusKind::Unrealistic, "u", dim, unreal_rows)?;
    let realistic_ids = unreal
        .ids()
        .zip(&realistic)
        .filter(|(_, &r)| r)
        .map(|(id, _)| id.to_string())
        .collect();
    Ok(SynthBenchmark {
        real,
        real_embeddings,
        unreal,
        unreal_embeddings,
        realistic_ids,
    })
}
