use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{continue_training, evaluate, train_probe, Probe, ProbeConfig};
use crate::dataset::{Corpus, Label};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::knn::DistanceRecord;
use crate::select::{fraction_count, random_subset_of_size, select_subset};

pub const DEFAULT_SPLIT: (f64, f64) = (0.7, 0.1);

/// Disjoint train/validation/test ids, each listed in corpus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("split serializes");
        bytes.push(b'\n');
        crate::dataset::write_file(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let spec: SplitSpec =
            serde_json::from_slice(&bytes).map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?;
        let mut seen = HashSet::new();
        for id in spec.train_ids.iter().chain(&spec.val_ids).chain(&spec.test_ids) {
            if !seen.insert(id) {
                return Err(Error::InvalidData(format!(
                    "{}: id {id} is in two parts",
                    path.display()
                )));
            }
        }
        Ok(spec)
    }
}

/// Seeded shuffle, then `floor(train * n)` train and `floor(val * n)`
/// validation ids; the rest is test.
pub fn split_corpus(corpus: &Corpus, seed: u64, train: f64, val: f64) -> Result<SplitSpec> {
    if !(train >= 0.0 && val >= 0.0 && train + val <= 1.0) {
        return Err(Error::param(format!(
            "split shares {train}/{val} must be non-negative and sum to <= 1"
        )));
    }
    let n = corpus.len();
    let n_train = fraction_count(train, n);
    let n_val = fraction_count(val, n).min(n - n_train);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut part = vec![2u8; n];
    for &i in &order[..n_train] {
        part[i] = 0;
    }
    for &i in &order[n_train..n_train + n_val] {
        part[i] = 1;
    }
    let mut spec = SplitSpec {
        train_ids: Vec::new(),
        val_ids: Vec::new(),
        test_ids: Vec::new(),
        seed,
    };
    for (s, p) in corpus.samples().iter().zip(part) {
        let bucket = match p {
            0 => &mut spec.train_ids,
            1 => &mut spec.val_ids,
            _ => &mut spec.test_ids,
        };
        bucket.push(s.id.clone());
    }
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Curated,
    Full,
    Random,
    Zero,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Curated => "curated",
            Regime::Full => "full",
            Regime::Random => "random",
            Regime::Zero => "zero",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub regime: Regime,
    pub phi_or_fraction: f64,
    pub seed: u64,
    /// Unrealistic samples used in the first phase (0 for the zero regime).
    pub train_size: usize,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub skipped_reason: Option<String>,
}

impl EvalResult {
    pub fn is_skipped(&self) -> bool {
        self.skipped_reason.is_some()
    }
}

pub struct GridInputs<'a> {
    pub unreal: &'a Corpus,
    pub unreal_embeddings: &'a EmbeddingMatrix,
    pub real: &'a Corpus,
    pub real_embeddings: &'a EmbeddingMatrix,
    /// Distances from every unrealistic sample to the real training split.
    pub records: &'a [DistanceRecord],
    pub split: &'a SplitSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub phis: Vec<f64>,
    pub seeds: Vec<u64>,
    pub probe: ProbeConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            phis: vec![0.0, 0.1, 0.25, 0.5, 0.75, 1.0],
            seeds: (0..5).collect(),
            probe: ProbeConfig::default(),
        }
    }
}

struct Prepared {
    unreal: EmbeddingMatrix,
    unreal_labels: Vec<Label>,
    real_train: EmbeddingMatrix,
    real_train_labels: Vec<Label>,
    real_test: EmbeddingMatrix,
    real_test_labels: Vec<Label>,
}

fn labels_of<S: AsRef<str>>(corpus: &Corpus, ids: &[S]) -> Result<Vec<Label>> {
    ids.iter()
        .map(|id| {
            corpus
                .get(id.as_ref())
                .map(|s| s.label)
                .ok_or_else(|| Error::UnknownId(id.as_ref().to_string()))
        })
        .collect()
}

fn prepare(inputs: &GridInputs) -> Result<Prepared> {
    let unreal = inputs.unreal_embeddings.aligned_to(inputs.unreal)?;
    let real = inputs.real_embeddings.aligned_to(inputs.real)?;
    if unreal.dim() != real.dim() {
        return Err(Error::DimensionMismatch {
            expected: real.dim(),
            actual: unreal.dim(),
        });
    }
    if inputs.split.test_ids.is_empty() {
        return Err(Error::EmptyInput("real-world test split"));
    }
    for r in inputs.records {
        if inputs.unreal.position(&r.query_id).is_none() {
            return Err(Error::UnknownId(r.query_id.clone()));
        }
    }
    Ok(Prepared {
        unreal_labels: inputs.unreal.labels(),
        unreal,
        real_train: real.select_ids(&inputs.split.train_ids)?,
        real_train_labels: labels_of(inputs.real, &inputs.split.train_ids)?,
        real_test: real.select_ids(&inputs.split.test_ids)?,
        real_test_labels: labels_of(inputs.real, &inputs.split.test_ids)?,
    })
}

enum Outcome {
    Done { accuracy: f64, f1: f64 },
    Skipped(String),
}

/// Phase one on the given unrealistic rows (skipped when empty), then phase
/// two on the real training split, then evaluation on the real test split.
fn run_cell(p: &Prepared, unreal_rows: &[usize], probe: &ProbeConfig) -> Result<Outcome> {
    let start = if unreal_rows.is_empty() {
        Probe::zeros(p.real_train.dim())
    } else {
        let x = p.unreal.select_rows(unreal_rows)?;
        let y: Vec<Label> = unreal_rows.iter().map(|&i| p.unreal_labels[i]).collect();
        match train_probe(&x, &y, probe) {
            Ok(probe) => probe,
            Err(Error::DegenerateTrainingSet(why)) => return Ok(Outcome::Skipped(format!("degenerate subset: {why}"))),
            Err(e) => return Err(e),
        }
    };
    let tuned = continue_training(start, &p.real_train, &p.real_train_labels, probe)?;
    let m = evaluate(&tuned, &p.real_test, &p.real_test_labels)?;
    Ok(Outcome::Done {
        accuracy: m.accuracy,
        f1: m.f1,
    })
}

/// Positions in corpus order, so that equal sets train identically.
fn positions(corpus: &Corpus, ids: &[String]) -> Vec<usize> {
    let mut rows: Vec<usize> = ids.iter().filter_map(|id| corpus.position(id)).collect();
    rows.sort_unstable();
    rows
}

#[derive(Clone, Copy)]
enum Cell {
    Curated(usize),
    Random(usize, u64),
    Zero,
    Full,
}

/// Trains and evaluates every (regime, phi, seed) cell.
///
/// The probe is seed-free, so curated, zero and full cells are computed once
/// and reported under every seed; only random subsets depend on the seed.
/// A random subset has the same size as the curated subset for its phi.
pub fn run_regime_grid(inputs: &GridInputs, config: &GridConfig) -> Result<Vec<EvalResult>> {
    config.probe.validate()?;
    if config.seeds.is_empty() {
        return Err(Error::param("grid needs at least one seed"));
    }
    let prepared = prepare(inputs)?;
    let curated: Vec<Vec<usize>> = config
        .phis
        .iter()
        .map(|&phi| {
            Ok(positions(
                inputs.unreal,
                &select_subset(inputs.records, phi)?.selected_ids,
            ))
        })
        .collect::<Result<_>>()?;

    let mut cells = vec![Cell::Zero, Cell::Full];
    for (k, _) in config.phis.iter().enumerate() {
        cells.push(Cell::Curated(k));
        for &seed in &config.seeds {
            cells.push(Cell::Random(k, seed));
        }
    }

    let all_rows: Vec<usize> = (0..inputs.unreal.len()).collect();
    let outcomes: Vec<(Cell, usize, Outcome)> = cells
        .par_iter()
        .map(|&cell| {
            let rows = match cell {
                Cell::Zero => Vec::new(),
                Cell::Full => all_rows.clone(),
                Cell::Curated(k) => curated[k].clone(),
                Cell::Random(k, seed) => {
                    let spec = random_subset_of_size(inputs.unreal, curated[k].len(), seed)?;
                    positions(inputs.unreal, &spec.selected_ids)
                }
            };
            let outcome = run_cell(&prepared, &rows, &config.probe)?;
            Ok((cell, rows.len(), outcome))
        })
        .collect::<Result<_>>()?;

    let mut results = Vec::new();
    for (cell, size, outcome) in outcomes {
        let (regime, phi, seeds): (Regime, f64, Vec<u64>) = match cell {
            Cell::Zero => (Regime::Zero, 0.0, config.seeds.clone()),
            Cell::Full => (Regime::Full, 1.0, config.seeds.clone()),
            Cell::Curated(k) => (Regime::Curated, config.phis[k], config.seeds.clone()),
            Cell::Random(k, seed) => (Regime::Random, config.phis[k], vec![seed]),
        };
        for seed in seeds {
            let (accuracy, f1, skipped_reason) = match &outcome {
                Outcome::Done { accuracy, f1 } => (Some(*accuracy), Some(*f1), None),
                Outcome::Skipped(why) => (None, None, Some(why.clone())),
            };
            results.push(EvalResult {
                regime,
                phi_or_fraction: phi,
                seed,
                train_size: size,
                accuracy,
                f1,
                skipped_reason,
            });
        }
    }
    results.sort_by(|a, b| {
        a.regime
            .cmp(&b.regime)
            .then(a.phi_or_fraction.total_cmp(&b.phi_or_fraction))
            .then(a.seed.cmp(&b.seed))
    });
    results.dedup();
    Ok(results)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSummary {
    pub regime: Regime,
    pub phi_or_fraction: f64,
    pub runs: usize,
    pub skipped: usize,
    pub mean_accuracy: Option<f64>,
    pub mean_f1: Option<f64>,
}

/// Means over seeds of the non-skipped rows, one row per (regime, phi).
pub fn summarize(results: &[EvalResult]) -> Vec<RegimeSummary> {
    let mut out: Vec<RegimeSummary> = Vec::new();
    let mut sums: Vec<(f64, f64)> = Vec::new();
    for r in results {
        let same = out
            .last()
            .is_some_and(|s| s.regime == r.regime && s.phi_or_fraction == r.phi_or_fraction);
        if !same {
            out.push(RegimeSummary {
                regime: r.regime,
                phi_or_fraction: r.phi_or_fraction,
                runs: 0,
                skipped: 0,
                mean_accuracy: None,
                mean_f1: None,
            });
            sums.push((0.0, 0.0));
        }
        let (s, sum) = (out.last_mut().unwrap(), sums.last_mut().unwrap());
        s.runs += 1;
        match (r.accuracy, r.f1) {
            (Some(a), Some(f)) => {
                sum.0 += a;
                sum.1 += f;
            }
            _ => s.skipped += 1,
        }
    }
    for (s, (a, f)) in out.iter_mut().zip(sums) {
        let done = s.runs - s.skipped;
        if done > 0 {
            s.mean_accuracy = Some(a / done as f64);
            s.mean_f1 = Some(f / done as f64);
        }
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results_csv<W: Write>(results: &[EvalResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::InvalidData(format!("writing results: {e}"));
    w.write_record([
        "regime",
        "phi_or_fraction",
        "seed",
        "train_size",
        "accuracy",
        "f1",
        "skipped_reason",
    ])
    .map_err(err)?;
    for r in results {
        w.write_record([
            r.regime.as_str(),
            &r.phi_or_fraction.to_string(),
            &r.seed.to_string(),
            &r.train_size.to_string(),
            &opt(r.accuracy),
            &opt(r.f1),
            r.skipped_reason.as_deref().unwrap_or(""),
        ])
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidData(format!("writing results: {e}")))
}

pub fn write_summary_csv<W: Write>(summary: &[RegimeSummary], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::InvalidData(format!("writing summary: {e}"));
    w.write_record([
        "regime",
        "phi_or_fraction",
        "runs",
        "skipped",
        "mean_accuracy",
        "mean_f1",
    ])
    .map_err(err)?;
    for s in summary {
        w.write_record([
            s.regime.as_str(),
            &s.phi_or_fraction.to_string(),
            &s.runs.to_string(),
            &s.skipped.to_string(),
            &opt(s.mean_accuracy),
            &opt(s.mean_f1),
        ])
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidData(format!("writing summary: {e}")))
}
