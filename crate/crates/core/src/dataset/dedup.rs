use std::collections::HashMap;

use super::{tokenize, Corpus};
use crate::error::{Error, Result};

pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone)]
pub struct DedupOutcome {
    pub corpus: Corpus,
    pub removed: Vec<String>,
}

/// Greedy near-duplicate removal in corpus order.
///
/// A sample is dropped iff its token-set Jaccard similarity to some sample
/// already kept is `>= threshold`. Candidates are found through an inverted
/// index over kept samples, and the shared-token counts it yields are the
/// exact intersection sizes, so no pair is approximated. Pairs sharing no
/// token have similarity 0 (or 1 when both are empty), which are handled
/// separately.
pub fn dedup(corpus: &Corpus, threshold: f64) -> Result<DedupOutcome> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::param(format!("dedup threshold {threshold} outside [0, 1]")));
    }

    let mut vocab: HashMap<&str, u32> = HashMap::new();
    let mut postings: Vec<Vec<u32>> = Vec::new();
    let mut kept_sizes: Vec<u32> = Vec::new();
    let mut kept_empty = false;
    let mut shared: Vec<u32> = Vec::new();
    let mut touched: Vec<u32> = Vec::new();

    let mut kept = Vec::with_capacity(corpus.len());
    let mut removed = Vec::new();

    for sample in corpus.samples() {
        let mut set: Vec<u32> = tokenize(&sample.text)
            .into_iter()
            .map(|t| {
                let next = vocab.len() as u32;
                *vocab.entry(t).or_insert(next)
            })
            .collect();
        set.sort_unstable();
        set.dedup();

        let duplicate = if threshold == 0.0 {
            !kept_sizes.is_empty()
        } else if set.is_empty() {
            kept_empty
        } else {
            for &tok in &set {
                if let Some(list) = postings.get(tok as usize) {
                    for &k in list {
                        if shared[k as usize] == 0 {
                            touched.push(k);
                        }
                        shared[k as usize] += 1;
                    }
                }
            }
            let size = set.len() as u32;
            let hit = touched.iter().any(|&k| {
                let inter = shared[k as usize];
                let union = size + kept_sizes[k as usize] - inter;
                inter as f64 / union as f64 >= threshold
            });
            for &k in &touched {
                shared[k as usize] = 0;
            }
            touched.clear();
            hit
        };

        if duplicate {
            removed.push(sample.id.clone());
            continue;
        }

        let k = kept_sizes.len() as u32;
        kept_sizes.push(set.len() as u32);
        shared.push(0);
        kept_empty |= set.is_empty();
        for &tok in &set {
            let tok = tok as usize;
            if postings.len() <= tok {
                postings.resize_with(tok + 1, Vec::new);
            }
            postings[tok].push(k);
        }
        kept.push(sample.clone());
    }

    let corpus = Corpus::new(corpus.kind(), kept)?.with_dedup_threshold(threshold);
    Ok(DedupOutcome { corpus, removed })
}
