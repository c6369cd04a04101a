//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so that every criterion is
//! attempted and reported even when an earlier one fails. The process exits
//! non-zero when any hard criterion fails; criterion 8 is soft and only
//! reported.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use realsub::dataset::Label;
use realsub::embed::EmbeddingMatrix;
use realsub::eval::{
    run_regime_grid, split_corpus, synth_benchmark, Confusion, GridConfig, GridInputs, ProbeConfig, Regime, SynthParams,
};
use realsub::knn::{build_index, default_centroid_count, DistanceRecord, IndexConfig};
use realsub::select::select_subset;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Number, name, soft, time limit, check.
type Criterion = (u32, &'static str, bool, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        (
            1,
            "exact kNN matches brute-force oracle",
            false,
            Duration::from_secs(60),
            knn_oracle,
        ),
        (
            2,
            "IVF exactness knob and default recall",
            false,
            Duration::from_secs(60),
            ivf_knob,
        ),
        (
            3,
            "percentile selection semantics",
            false,
            Duration::MAX,
            selection_semantics,
        ),
        (
            4,
            "realism recovery on the synthetic benchmark",
            false,
            Duration::from_secs(120),
            realism_recovery,
        ),
        (
            5,
            "curated beats random and full",
            false,
            Duration::from_secs(180),
            less_but_better,
        ),
        (
            6,
            "accuracy/F1 match confusion oracle",
            false,
            Duration::MAX,
            metric_oracle,
        ),
        (
            7,
            "pipeline reruns are byte-identical",
            false,
            Duration::MAX,
            determinism,
        ),
        (
            8,
            "100k x 25k x 256 performance",
            true,
            Duration::from_secs(300),
            performance,
        ),
    ];
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());

    let mut hard_failures = 0;
    for (n, name, soft, limit, run) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let mut outcome = run();
        let took = start.elapsed();
        if took > limit {
            outcome.pass = false;
            outcome
                .detail
                .push_str(&format!("; exceeded the {}s limit", limit.as_secs()));
        }
        let verdict = match (outcome.pass, soft) {
            (true, _) => "PASS",
            (false, true) => "FAIL (soft, not fatal)",
            (false, false) => "FAIL",
        };
        println!(
            "criterion {n} [{name}]: {verdict} in {:.1}s: {}",
            took.as_secs_f64(),
            outcome.detail
        );
        if !outcome.pass && !soft {
            hard_failures += 1;
        }
    }
    if hard_failures > 0 {
        println!("{hard_failures} hard criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- helpers

fn uniform(prefix: &str, rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingMatrix {
    let ids = (0..rows).map(|i| format!("{prefix}{i}")).collect();
    let data = (0..rows * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    EmbeddingMatrix::new(dim, ids, data, false).unwrap()
}

/// Small integer coordinates, so that exactly equal distances are common.
fn lattice(prefix: &str, rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingMatrix {
    let ids = (0..rows).map(|i| format!("{prefix}{i}")).collect();
    let data = (0..rows * dim).map(|_| rng.random_range(-2i32..=2) as f32).collect();
    EmbeddingMatrix::new(dim, ids, data, false).unwrap()
}

fn gaussian(prefix: &str, rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingMatrix {
    let ids = (0..rows).map(|i| format!("{prefix}{i}")).collect();
    let data = (0..rows * dim).map(|_| StandardNormal.sample(rng)).collect();
    EmbeddingMatrix::new(dim, ids, data, false).unwrap()
}

/// Every pair in row order with a strict `<`, so the lowest reference row
/// wins exact ties.
fn brute_force(q: &EmbeddingMatrix, r: &EmbeddingMatrix) -> Vec<(usize, f64)> {
    (0..q.rows())
        .map(|i| {
            let mut best = (usize::MAX, f64::INFINITY);
            for j in 0..r.rows() {
                let mut s = 0.0f64;
                for (a, b) in q.row(i).iter().zip(r.row(j)) {
                    let d = *a as f64 - *b as f64;
                    s += d * d;
                }
                if s < best.1 {
                    best = (j, s);
                }
            }
            (best.0, best.1.sqrt())
        })
        .collect()
}

/// Share of queries whose approximate neighbor is the exact one, or sits at
/// exactly the same distance.
fn recall(approx: &[DistanceRecord], exact: &[DistanceRecord]) -> f64 {
    let hits = approx
        .iter()
        .zip(exact)
        .filter(|(a, e)| a.neighbor_id == e.neighbor_id || a.distance == e.distance)
        .count();
    hits as f64 / exact.len() as f64
}

// ------------------------------------------------------------- criterion 1

fn knn_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut id_mismatch, mut dist_mismatch, mut records) = (0, 0, 0);
    for instance in 0..100 {
        let dim = rng.random_range(2..=64);
        let n_ref = rng.random_range(1..=2000);
        let n_q = rng.random_range(1..=500);
        let (r, q) = if instance % 4 == 0 {
            (lattice("r", n_ref, dim, &mut rng), lattice("q", n_q, dim, &mut rng))
        } else {
            (uniform("r", n_ref, dim, &mut rng), uniform("q", n_q, dim, &mut rng))
        };
        let got = build_index(r.clone(), &IndexConfig::default())
            .unwrap()
            .nearest(&q)
            .unwrap();
        for (rec, (row, d)) in got.iter().zip(brute_force(&q, &r)) {
            records += 1;
            if rec.neighbor_id != r.ids()[row] {
                id_mismatch += 1;
            }
            if (rec.distance - d).abs() > 1e-5 * d {
                dist_mismatch += 1;
            }
        }
    }
    Outcome::new(
        id_mismatch == 0 && dist_mismatch == 0,
        format!(
            "100 instances, {records} records, {id_mismatch} neighbor mismatches, {dist_mismatch} distance mismatches"
        ),
    )
}

// ------------------------------------------------------------- criterion 2

fn ivf_knob() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pointwise_diffs = 0;
    for instance in 0..6 {
        let dim = rng.random_range(2..=32);
        let (r, q) = if instance % 2 == 0 {
            (lattice("r", 1500, dim, &mut rng), lattice("q", 300, dim, &mut rng))
        } else {
            (gaussian("r", 1500, dim, &mut rng), gaussian("q", 300, dim, &mut rng))
        };
        let exact = build_index(r.clone(), &IndexConfig::default())
            .unwrap()
            .nearest(&q)
            .unwrap();
        let ivf = build_index(r, &IndexConfig::ivf()).unwrap();
        let full = ivf.nearest_with_nprobe(&q, ivf.centroid_count()).unwrap();
        pointwise_diffs += exact.iter().zip(&full).filter(|(a, b)| a != b).count();
    }

    let r = gaussian("r", 10_000, 64, &mut rng);
    let q = gaussian("q", 1_000, 64, &mut rng);
    let exact = build_index(r.clone(), &IndexConfig::default())
        .unwrap()
        .nearest(&q)
        .unwrap();
    let ivf = build_index(r, &IndexConfig::ivf()).unwrap();
    let got = recall(&ivf.nearest(&q).unwrap(), &exact);

    // Not part of the verdict: the same index settings on data that has
    // cluster structure for the quantizer to find.
    let (cr, cq) = clustered(10_000, 1_000, 64, 100, &mut rng);
    let c_exact = build_index(cr.clone(), &IndexConfig::default())
        .unwrap()
        .nearest(&cq)
        .unwrap();
    let c_recall = recall(
        &build_index(cr, &IndexConfig::ivf()).unwrap().nearest(&cq).unwrap(),
        &c_exact,
    );

    Outcome::new(
        pointwise_diffs == 0 && got >= 0.90,
        format!(
            "nprobe=c differs from exact at {pointwise_diffs} points; recall@1 {got:.3} (need 0.90) with c={} nprobe=8 on i.i.d. Gaussians; \
             for reference {c_recall:.3} on 100-cluster Gaussian mixture",
            default_centroid_count(10_000)
        ),
    )
}

/// Mixture of `k` unit Gaussians whose centres are spread with scale 4.
fn clustered(
    n_ref: usize,
    n_q: usize,
    dim: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> (EmbeddingMatrix, EmbeddingMatrix) {
    let centres: Vec<Vec<f32>> = (0..k)
        .map(|_| {
            (0..dim)
                .map(|_| 4.0 * Distribution::<f32>::sample(&StandardNormal, rng))
                .collect()
        })
        .collect();
    let mut draw = |prefix: &str, rows: usize| {
        let mut data = Vec::with_capacity(rows * dim);
        for _ in 0..rows {
            let c = &centres[rng.random_range(0..k)];
            data.extend(c.iter().map(|&m| m + Distribution::<f32>::sample(&StandardNormal, rng)));
        }
        EmbeddingMatrix::new(dim, (0..rows).map(|i| format!("{prefix}{i}")).collect(), data, false).unwrap()
    };
    let r = draw("r", n_ref);
    let q = draw("q", n_q);
    (r, q)
}

// ------------------------------------------------------------- criterion 3

fn records_from(values: &[f64]) -> Vec<DistanceRecord> {
    values
        .iter()
        .enumerate()
        .map(|(i, &d)| DistanceRecord {
            query_id: format!("u{i:04}"),
            neighbor_id: format!("r{i}"),
            distance: d,
        })
        .collect()
}

fn selection_semantics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures: Vec<String> = Vec::new();
    let mut tie_cases = 0;
    let mut fail = |msg: String| {
        if failures.len() < 5 {
            failures.push(msg);
        }
    };

    for case in 0..300 {
        let n = rng.random_range(1..=400);
        // A handful of distinct levels forces ties; every third case is tie-free.
        let values: Vec<f64> = if case % 3 == 0 {
            let mut v: Vec<f64> = (0..n).map(|i| i as f64 * 0.01 + 0.5).collect();
            v.shuffle(&mut rng);
            v
        } else {
            let levels = rng.random_range(1..=12);
            (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.25).collect()
        };
        let records = records_from(&values);
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);

        // phi = i / 1000 keeps floor(phi * n) in integer arithmetic.
        let mut milles: Vec<usize> = (0..6).map(|_| rng.random_range(0..=1000)).collect();
        milles.extend([0, 1000]);
        milles.sort();
        let mut previous: Option<BTreeSet<String>> = None;
        for &i in &milles {
            let phi = i as f64 / 1000.0;
            let floor = i * n / 1000;
            let spec = select_subset(&records, phi).unwrap();
            let chosen: BTreeSet<String> = spec.selected_ids.iter().cloned().collect();
            let count = spec.manifest.selected_count;

            if i == 0 {
                if count != 0 || spec.manifest.threshold != -1.0 {
                    fail(format!("case {case}: phi=0 selected {count}"));
                }
            } else {
                let k = floor.min(n - 1);
                let theta = sorted[k];
                let ties_beyond = sorted[k + 1..].iter().filter(|&&v| v == theta).count();
                if spec.manifest.threshold != theta {
                    fail(format!(
                        "case {case} phi {phi}: threshold {} vs {theta}",
                        spec.manifest.threshold
                    ));
                }
                if count != k + 1 + ties_beyond {
                    fail(format!(
                        "case {case} phi {phi}: count {count} vs {}",
                        k + 1 + ties_beyond
                    ));
                }
                if (count > k + 1) != (ties_beyond > 0) {
                    fail(format!("case {case} phi {phi}: inflation without ties"));
                }
                tie_cases += usize::from(ties_beyond > 0);
                for (id, &v) in records.iter().map(|r| &r.query_id).zip(&values) {
                    if chosen.contains(id) != (v <= theta) {
                        fail(format!("case {case} phi {phi}: {id} at {v} vs threshold {theta}"));
                    }
                }
            }
            if count < floor {
                fail(format!("case {case} phi {phi}: count {count} below floor {floor}"));
            }
            if i == 1000 && count != n {
                fail(format!("case {case}: phi=1 selected {count} of {n}"));
            }
            if let Some(prev) = &previous {
                if !prev.is_subset(&chosen) {
                    fail(format!("case {case} phi {phi}: not nested"));
                }
            }

            let mut shuffled = records.clone();
            shuffled.shuffle(&mut rng);
            let again = select_subset(&shuffled, phi).unwrap();
            let again_set: BTreeSet<String> = again.selected_ids.into_iter().collect();
            if again_set != chosen || again.manifest.threshold != spec.manifest.threshold {
                fail(format!("case {case} phi {phi}: order dependent"));
            }
            previous = Some(chosen);
        }
    }

    // Constructed tie at the 10% threshold, in the spirit of a distance table
    // whose 10% row holds more samples than 10% of the corpus.
    let n = 1000;
    let distinct: Vec<f64> = (0..n).map(|i| 0.1 + i as f64 * 0.001).collect();
    // 60 values below 0.30, 113 at 0.30, the rest above.
    let tied: Vec<f64> = (0..n)
        .map(|i| match i {
            0..60 => 0.1 + i as f64 * 0.001,
            60..173 => 0.30,
            _ => 0.31 + (i - 173) as f64 * 0.001,
        })
        .collect();
    let plain = select_subset(&records_from(&distinct), 0.10).unwrap().manifest;
    let with_ties = select_subset(&records_from(&tied), 0.10).unwrap().manifest;
    let demo_ok = plain.selected_count == 101 && with_ties.threshold == 0.30 && with_ties.selected_count == 173;

    let pass = failures.is_empty() && demo_ok && tie_cases > 0;
    Outcome::new(
        pass,
        format!(
            "300 multisets x 8 phis ({tie_cases} with ties past the percentile index); tie demo n=1000 phi=0.10: \
             floor 100, sorted[100] selects {} without ties, {} with 113 values tied at 0.30{}",
            plain.selected_count,
            with_ties.selected_count,
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failures.join(" | "))
            }
        ),
    )
}

// ------------------------------------------------------------ criteria 4, 5

struct Bench {
    realistic: BTreeSet<String>,
    unreal: realsub::dataset::Corpus,
    unreal_emb: EmbeddingMatrix,
    real: realsub::dataset::Corpus,
    real_emb: EmbeddingMatrix,
    split: realsub::eval::SplitSpec,
    records: Vec<DistanceRecord>,
}

fn bench(seed: u64) -> Bench {
    let b = synth_benchmark(&SynthParams {
        n_real: 1000,
        n_unreal: 5000,
        realistic_fraction: 0.3,
        dim: 32,
        noise_label_rate: 0.5,
        seed,
    })
    .unwrap();
    let split = split_corpus(&b.real, seed, 0.7, 0.1).unwrap();
    let train = b.real_embeddings.select_ids(&split.train_ids).unwrap();
    let records = build_index(train, &IndexConfig::default())
        .unwrap()
        .nearest(&b.unreal_embeddings)
        .unwrap();
    Bench {
        realistic: b.realistic_ids,
        unreal: b.unreal,
        unreal_emb: b.unreal_embeddings,
        real: b.real,
        real_emb: b.real_embeddings,
        split,
        records,
    }
}

fn realism_recovery() -> Outcome {
    let precisions: Vec<f64> = (0..10)
        .map(|seed| {
            let b = bench(seed);
            let spec = select_subset(&b.records, 0.3).unwrap();
            let hits = spec.selected_ids.iter().filter(|id| b.realistic.contains(*id)).count();
            hits as f64 / spec.selected_ids.len() as f64
        })
        .collect();
    let mean = precisions.iter().sum::<f64>() / 10.0;
    let min = precisions.iter().copied().fold(f64::INFINITY, f64::min);
    Outcome::new(
        mean >= 0.9,
        format!("mean precision {mean:.4} (min {min:.4}) over 10 seeds; random expectation 0.3"),
    )
}

fn less_but_better() -> Outcome {
    let (mut wins, mut ties) = (0, 0);
    let (mut curated_sum, mut random_sum, mut full_sum) = (0.0, 0.0, 0.0);
    for seed in 0..10 {
        let b = bench(seed);
        let inputs = GridInputs {
            unreal: &b.unreal,
            unreal_embeddings: &b.unreal_emb,
            real: &b.real,
            real_embeddings: &b.real_emb,
            records: &b.records,
            split: &b.split,
        };
        let results = run_regime_grid(
            &inputs,
            &GridConfig {
                phis: vec![0.3],
                seeds: vec![seed],
                probe: ProbeConfig::default(),
            },
        )
        .unwrap();
        let acc = |regime: Regime| {
            results
                .iter()
                .find(|r| r.regime == regime && r.seed == seed)
                .and_then(|r| r.accuracy)
                .expect("row present and not skipped")
        };
        let (c, r, f) = (acc(Regime::Curated), acc(Regime::Random), acc(Regime::Full));
        wins += usize::from(c > r);
        ties += usize::from(c == r);
        curated_sum += c;
        random_sum += r;
        full_sum += f;
    }
    let (c, r, f) = (curated_sum / 10.0, random_sum / 10.0, full_sum / 10.0);
    Outcome::new(
        wins >= 8 && c > f,
        format!(
            "curated beats random in {wins}/10 seeds (need 8; {ties} exact ties); mean accuracy curated {c:.4}, random {r:.4}, full {f:.4}"
        ),
    )
}

// ------------------------------------------------------------- criterion 6

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=100);
        let p_rate = rng.random_range(0.0..=1.0);
        let pred: Vec<bool> = (0..n).map(|_| rng.random_bool(p_rate)).collect();
        let actual: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();

        let mut cells = BTreeMap::new();
        for (&p, &a) in pred.iter().zip(&actual) {
            *cells.entry((p, a)).or_insert(0usize) += 1;
        }
        let cell = |p, a| *cells.get(&(p, a)).unwrap_or(&0) as f64;
        let (tp, fp, fn_, tn) = (
            cell(true, true),
            cell(true, false),
            cell(false, true),
            cell(false, false),
        );
        let accuracy = (tp + tn) / n as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + rec > 0.0 {
            2.0 * precision * rec / (precision + rec)
        } else {
            0.0
        };

        let labels = |v: &[bool]| v.iter().map(|&b| Label::from(b)).collect::<Vec<_>>();
        let c = Confusion::from_predictions(&labels(&pred), &labels(&actual));
        if c.accuracy() != accuracy || c.f1() != f1 {
            mismatches += 1;
        }
    }
    let hand = Confusion {
        tp: 3,
        fp: 1,
        fn_: 1,
        tn: 5,
    };
    let hand_ok = hand.accuracy() == 0.8 && hand.f1() == 0.75;
    Outcome::new(
        mismatches == 0 && hand_ok,
        format!(
            "{mismatches}/1000 mismatches; hand case accuracy {} F1 {}",
            hand.accuracy(),
            hand.f1()
        ),
    )
}

// ------------------------------------------------------------- criterion 7

fn realsub(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_realsub"))
        .args(args)
        .args(["--log-level", "warn"])
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

/// Relative path to digest for every file under `root`, skipping the run logs.
fn tree_digests(root: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            if rel == "runlog" {
                continue;
            }
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(rel, realsub::digest::digest_file(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    let (data, a, b) = (dir("data"), dir("run-a"), dir("run-b"));
    let run = || -> Result<(), String> {
        realsub(&[
            "synth",
            "--out",
            &data,
            "--seed",
            "13",
            "--n-real",
            "400",
            "--n-unreal",
            "1600",
            "--synth-dim",
            "16",
        ])?;
        let u = format!("{data}/synth/unrealistic.jsonl");
        let r = format!("{data}/synth/realworld.jsonl");
        for out in [&a, &b] {
            realsub(&[
                "all",
                "--out",
                out,
                "--seed",
                "13",
                "--unrealistic",
                &u,
                "--realworld",
                &r,
                "--backend",
                "mock",
                "--dim",
                "64",
            ])?;
        }
        Ok(())
    };
    if let Err(e) = run() {
        return Outcome::new(false, format!("pipeline failed: {e}"));
    }
    let (da, db) = (tree_digests(Path::new(&a)), tree_digests(Path::new(&b)));
    let differing: Vec<&String> = da
        .keys()
        .chain(db.keys())
        .filter(|k| da.get(*k) != db.get(*k))
        .collect();
    let has_runlog = Path::new(&a).join("runlog/eval.json").is_file();
    Outcome::new(
        differing.is_empty() && da.len() > 40 && has_runlog,
        format!(
            "two `all` runs, seed 13, mock embedder: {} artifacts compared, {} differ{}",
            da.len(),
            differing.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!(" ({differing:?})")
            }
        ),
    )
}

// ------------------------------------------------------------- criterion 8

fn performance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let r = gaussian("r", 25_000, 256, &mut rng);
    let q = gaussian("q", 100_000, 256, &mut rng);
    let threads = available_cores();

    let start = Instant::now();
    let exact = build_index(r.clone(), &IndexConfig::default())
        .unwrap()
        .nearest(&q)
        .unwrap();
    let exact_secs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let ivf = build_index(r, &IndexConfig::ivf()).unwrap();
    let build_secs = start.elapsed().as_secs_f64();
    let approx = ivf.nearest(&q).unwrap();
    let ivf_secs = start.elapsed().as_secs_f64();

    let speedup = exact_secs / ivf_secs;
    let rec = recall(&approx, &exact);
    Outcome::new(
        exact_secs < 300.0 && speedup >= 2.0 && rec >= 0.85,
        format!(
            "{threads} thread(s): exact {exact_secs:.1}s (limit 300); IVF {ivf_secs:.1}s incl. {build_secs:.1}s build, \
             speedup {speedup:.1}x (need 2); recall@1 {rec:.3} (need 0.85) on i.i.d. Gaussians"
        ),
    )
}

fn available_cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
