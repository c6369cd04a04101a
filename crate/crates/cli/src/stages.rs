//! One function per subcommand. Every stage reads its inputs from the output
//! directory (or the configured input files), writes through a staging
//! [`Stage`], and commits a provenance record.

use std::collections::BTreeMap;
use std::path::Path;

use realsub::dataset::{dedup, load_corpus, save_corpus, save_id_list, Corpus, CorpusKind, CorpusManifest};
use realsub::embed::{embed_corpus_with_cache, load_embeddings, save_embeddings, EmbeddingCache, EmbeddingMatrix};
use realsub::eval::{
    run_regime_grid, split_corpus, summarize, synth_benchmark, write_results_csv, write_summary_csv, GridInputs,
    SplitSpec,
};
use realsub::knn::{build_index, load_index, load_records, save_index, save_records, DistanceRecord};
use realsub::report::{
    histogram, pca_project, percentile_table, save_histogram, save_percentile_table, save_projection,
};
use realsub::select::{emit_subset, select_subset};
use serde::Serialize;
use serde_json::json;

use crate::config::{BackendKind, PipelineConfig};
use crate::error::{CliError, Context};
use crate::workspace::{write_json, Workspace, CACHE_DIR};

pub const SPLIT: &str = "splits/realworld.json";
pub const INDEX: &str = "index/realworld-train.idx";
pub const RECORDS: &str = "distances/records.csv";

const KINDS: [CorpusKind; 2] = [CorpusKind::Unrealistic, CorpusKind::Realworld];

fn raw_corpus(kind: CorpusKind) -> String {
    format!("corpora/{kind}.jsonl")
}

/// The corpus later stages read: deduplicated when dedup is enabled.
pub fn corpus_rel(cfg: &PipelineConfig, kind: CorpusKind) -> String {
    if cfg.dedup.enabled {
        format!("corpora/{kind}.dedup.jsonl")
    } else {
        raw_corpus(kind)
    }
}

pub fn embeddings_rel(kind: CorpusKind) -> String {
    format!("embeddings/{kind}.emb")
}

pub fn selection_rel(phi: f64) -> String {
    format!("selection/phi-{phi}.jsonl")
}

/// Corpus manifest without its creation time, which goes to the run log.
#[derive(Serialize)]
struct StableManifest<'a> {
    kind: CorpusKind,
    sample_count: usize,
    content_digest: &'a str,
    dedup_threshold: Option<f64>,
}

impl<'a> From<&'a CorpusManifest> for StableManifest<'a> {
    fn from(m: &'a CorpusManifest) -> Self {
        Self {
            kind: m.kind,
            sample_count: m.sample_count,
            content_digest: &m.content_digest,
            dedup_threshold: m.dedup_threshold,
        }
    }
}

fn manifest_rel(corpus_rel: &str) -> String {
    corpus_rel.replace(".jsonl", ".manifest.json")
}

fn read_corpus(ws: &Workspace, rel: &str, kind: CorpusKind) -> Result<Corpus, CliError> {
    let path = ws.require(rel, if rel.contains(".dedup.") { "dedup" } else { "ingest" })?;
    load_corpus(&path, kind).context(rel)
}

fn read_embeddings(ws: &Workspace, kind: CorpusKind) -> Result<EmbeddingMatrix, CliError> {
    let rel = embeddings_rel(kind);
    load_embeddings(&ws.require(&rel, "embed")?).context(&rel)
}

fn read_split(ws: &Workspace) -> Result<SplitSpec, CliError> {
    SplitSpec::load(&ws.require(SPLIT, "index")?).context(SPLIT)
}

fn read_records(ws: &Workspace) -> Result<Vec<DistanceRecord>, CliError> {
    load_records(&ws.require(RECORDS, "distances")?).context(RECORDS)
}

fn save_corpus_with_manifest(
    stage: &mut crate::workspace::Stage<'_>,
    corpus: &Corpus,
    rel: &str,
    notes: &mut BTreeMap<String, serde_json::Value>,
) -> Result<(), CliError> {
    save_corpus(corpus, &stage.output(rel)?)?;
    let m = corpus.manifest();
    write_json(&stage.output(&manifest_rel(rel))?, &StableManifest::from(m))?;
    notes.insert(rel.to_string(), serde_json::to_value(m).expect("manifest serializes"));
    Ok(())
}

pub fn ingest(ws: &Workspace, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut stage = ws.stage("ingest")?;
    let mut notes = BTreeMap::new();
    for kind in KINDS {
        let path = input_path(cfg, kind)?;
        stage.input(path)?;
        let corpus = load_corpus(path, kind).context(path.display())?;
        tracing::info!(%kind, samples = corpus.len(), "loaded corpus");
        save_corpus_with_manifest(&mut stage, &corpus, &raw_corpus(kind), &mut notes)?;
    }
    stage.commit(&cfg.digest(), cfg.seed, notes)?;
    Ok(())
}

pub fn input_path(cfg: &PipelineConfig, kind: CorpusKind) -> Result<&Path, CliError> {
    let p = match kind {
        CorpusKind::Unrealistic => &cfg.inputs.unrealistic,
        CorpusKind::Realworld => &cfg.inputs.realworld,
    };
    let p = p
        .as_deref()
        .ok_or_else(|| CliError::config(format!("no {kind} corpus configured (inputs.{kind} or --{kind})")))?;
    if !p.is_file() {
        return Err(CliError::config(format!(
            "{kind} corpus {} does not exist",
            p.display()
        )));
    }
    Ok(p)
}

pub fn dedup_stage(ws: &Workspace, cfg: &PipelineConfig) -> Result<(), CliError> {
    if !cfg.dedup.enabled {
        tracing::info!("dedup disabled; later stages read the ingested corpora");
        return Ok(());
    }
    let mut stage = ws.stage("dedup")?;
    let mut notes = BTreeMap::new();
    for kind in KINDS {
        let rel = raw_corpus(kind);
        let corpus = read_corpus(ws, &rel, kind)?;
        stage.input(&ws.path(&rel))?;
        let outcome = dedup(&corpus, cfg.dedup.threshold)?;
        tracing::info!(%kind, removed = outcome.removed.len(), kept = outcome.corpus.len(), "dedup");
        save_corpus_with_manifest(&mut stage, &outcome.corpus, &corpus_rel(cfg, kind), &mut notes)?;
        save_id_list(&outcome.removed, &stage.output(&format!("corpora/{kind}.removed.txt"))?)?;
    }
    stage.commit(&cfg.digest(), cfg.seed, notes)?;
    Ok(())
}

pub fn embed(ws: &Workspace, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut stage = ws.stage("embed")?;
    let embedder = cfg.embedder();
    let mut cache = match cfg.embed.backend {
        BackendKind::External => {
            let dir = ws.path(CACHE_DIR);
            std::fs::create_dir_all(&dir).context(dir.display())?;
            Some(EmbeddingCache::open(&dir.join("embeddings.ech"))?)
        }
        _ => None,
    };
    for kind in KINDS {
        let rel = corpus_rel(cfg, kind);
        let corpus = read_corpus(ws, &rel, kind)?;
        stage.input(&ws.path(&rel))?;
        let matrix = match cfg.embed.backend {
            BackendKind::Precomputed => {
                let src = vectors_path(cfg, kind)?;
                stage.input(src)?;
                let m = load_embeddings(src).context(src.display())?;
                m.aligned_to(&corpus).context(src.display())?
            }
            _ => embed_corpus_with_cache(&corpus, &embedder, cache.as_mut())?,
        };
        tracing::info!(%kind, rows = matrix.rows(), dim = matrix.dim(), "embedded");
        save_embeddings(&matrix, &stage.output(&embeddings_rel(kind))?)?;
    }
    stage.commit(&cfg.digest(), cfg.seed, BTreeMap::new())?;
    Ok(())
}

pub fn vectors_path(cfg: &PipelineConfig, kind: CorpusKind) -> Result<&Path, CliError> {
    let p = match kind {
        CorpusKind::Unrealistic => &cfg.embed.unrealistic_vectors,
        CorpusKind::Realworld => &cfg.embed.realworld_vectors,
    };
    let p = p
        .as_deref()
        .ok_or_else(|| CliError::config(format!("precomputed backend needs embed.{kind}_vectors")))?;
    if !p.is_file() {
        return Err(CliError::config(format!("{kind} vectors {} do not exist", p.display())));
    }
    Ok(p)
}

/// Splits the real corpus and indexes the training part.
pub fn index(ws: &Workspace, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut stage = ws.stage("index")?;
    let rel = corpus_rel(cfg, CorpusKind::Realworld);
    let real = read_corpus(ws, &rel, CorpusKind::Realworld)?;
    stage.input(&ws.path(&rel))?;
    let r_emb = read_embeddings(ws, CorpusKind::Realworld)?;
    stage.input(&ws.path(&embeddings_rel(CorpusKind::Realworld)))?;

    let split = split_corpus(&real, cfg.seed, cfg.eval.train_share, cfg.eval.val_share)?;
    split.save(&stage.output(SPLIT)?)?;
    let train = r_emb.select_ids(&split.train_ids).context("real training split")?;
    let index = build_index(train, &cfg.index_config())?;
    save_index(&index, &stage.output(INDEX)?)?;
    let notes = BTreeMap::from([
        ("mode".to_string(), json!(index.mode())),
        ("centroids".to_string(), json!(index.centroid_count())),
        ("reference_rows".to_string(), json!(index.reference().rows())),
    ]);
    stage.commit(&cfg.digest(), cfg.seed, notes)?;
    Ok(())
}

pub fn distances(ws: &Workspace, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut stage = ws.stage("distances")?;
    let u_rel = embeddings_rel(CorpusKind::Unrealistic);
    let r_rel = embeddings_rel(CorpusKind::Realworld);
    let u_emb = read_embeddings(ws, CorpusKind::Unrealistic)?;
    let r_emb = read_embeddings(ws, CorpusKind::Realworld)?;
    if u_emb.dim() != r_emb.dim() {
        return Err(CliError::input(format!(
            "dimension mismatch: {u_rel} has dim {}, {r_rel} has dim {}",
            u_emb.dim(),
            r_emb.dim()
        )));
    }
    let split = read_split(ws)?;
    for rel in [&u_rel, &r_rel, SPLIT, INDEX] {
        stage.input(&ws.require(rel, "index")?)?;
    }
    let train = r_emb.select_ids(&split.train_ids).context("real training split")?;
    let index = load_index(&ws.path(INDEX), train).context(INDEX)?;
    let records = index.nearest(&u_emb)?;
    save_records(&records, &stage.output(RECORDS)?)?;
    stage.commit(&cfg.digest(), cfg.seed, BTreeMap::new())?;
    Ok(())
}

pub fn select(ws: &Workspace, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut stage = ws.stage("select")?;
    let u_rel = corpus_rel(cfg, CorpusKind::Unrealistic);
    let r_rel = corpus_rel(cfg, CorpusKind::Realworld);
    let unreal = read_corpus(ws, &u_rel, CorpusKind::Unrealistic)?;
    let real = read_corpus(ws, &r_rel, CorpusKind::Realworld)?;
    let records = read_records(ws)?;
    for rel in [&u_rel, &r_rel, RECORDS] {
        stage.input(&ws.path(rel))?;
    }

    let mut summary = String::from("phi,threshold,selected_count,total_count\n");
    for phi in cfg.grid_config().phis {
        let spec = select_subset(&records, phi)?
            .with_corpus_digests(&unreal.manifest().content_digest, &real.manifest().content_digest);
        let rel = selection_rel(phi);
        let stem = rel.trim_end_matches(".jsonl");
        let path = stage.output(&rel)?;
        for suffix in [".subset", ".train.jsonl", ".val.jsonl"] {
            stage.output(&format!("{stem}{suffix}"))?;
        }
        emit_subset(&unreal, &spec, &path, Some(cfg.seed))?;
        let m = &spec.manifest;
        tracing::info!(phi, threshold = m.threshold, selected = m.selected_count, "selected");
        summary.push_str(&format!(
            "{},{},{},{}\n",
            phi, m.threshold, m.selected_count, m.total_count
        ));
    }
    std::fs::write(stage.output("selection/summary.csv")?, summary)?;
    stage.commit(&cfg.digest(), cfg.seed, BTreeMap::new())?;
    Ok(())
}

pub fn report(ws: &Workspace, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut stage = ws.stage("report")?;
    let records = read_records(ws)?;
    let u_emb = read_embeddings(ws, CorpusKind::Unrealistic)?;
    let r_emb = read_embeddings(ws, CorpusKind::Realworld)?;
    for rel in [
        RECORDS,
        &embeddings_rel(CorpusKind::Unrealistic),
        &embeddings_rel(CorpusKind::Realworld),
    ] {
        stage.input(&ws.path(rel))?;
    }
    let h = histogram(&records, cfg.report.bins)?;
    save_histogram(&h, &stage.output("report/histogram.csv")?)?;
    let rows = percentile_table(&records, &cfg.phis)?;
    save_percentile_table(&rows, records.len(), &stage.output("report/percentiles.csv")?)?;
    let projection = pca_project(&u_emb, &r_emb, cfg.report.projection_cap, cfg.seed)?;
    save_projection(&projection, &stage.output("report/projection.csv")?)?;
    stage.commit(&cfg.digest(), cfg.seed, BTreeMap::new())?;
    Ok(())
}

pub fn eval(ws: &Workspace, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut stage = ws.stage("eval")?;
    let u_rel = corpus_rel(cfg, CorpusKind::Unrealistic);
    let r_rel = corpus_rel(cfg, CorpusKind::Realworld);
    let unreal = read_corpus(ws, &u_rel, CorpusKind::Unrealistic)?;
    let real = read_corpus(ws, &r_rel, CorpusKind::Realworld)?;
    let u_emb = read_embeddings(ws, CorpusKind::Unrealistic)?;
    let r_emb = read_embeddings(ws, CorpusKind::Realworld)?;
    let split = read_split(ws)?;
    let records = read_records(ws)?;
    for rel in [
        u_rel.as_str(),
        r_rel.as_str(),
        &embeddings_rel(CorpusKind::Unrealistic),
        &embeddings_rel(CorpusKind::Realworld),
        SPLIT,
        RECORDS,
    ] {
        stage.input(&ws.path(rel))?;
    }
    let inputs = GridInputs {
        unreal: &unreal,
        unreal_embeddings: &u_emb,
        real: &real,
        real_embeddings: &r_emb,
        records: &records,
        split: &split,
    };
    let results = run_regime_grid(&inputs, &cfg.grid_config())?;
    let skipped = results.iter().filter(|r| r.is_skipped()).count();
    if skipped > 0 {
        tracing::warn!(skipped, "grid cells skipped; see skipped_reason in eval/results.csv");
    }
    let mut out = Vec::new();
    write_results_csv(&results, &mut out)?;
    std::fs::write(stage.output("eval/results.csv")?, out)?;
    let mut out = Vec::new();
    write_summary_csv(&summarize(&results), &mut out)?;
    std::fs::write(stage.output("eval/summary.csv")?, out)?;
    stage.commit(&cfg.digest(), cfg.seed, BTreeMap::new())?;
    Ok(())
}

/// Writes a synthetic benchmark under `synth/`: both corpora, their raw
/// vectors (usable with the precomputed backend) and the ground-truth ids.
pub fn synth(ws: &Workspace, cfg: &PipelineConfig) -> Result<(), CliError> {
    let mut stage = ws.stage("synth")?;
    let b = synth_benchmark(&cfg.synth).map_err(|e| CliError::from(e).context("synth"))?;
    save_corpus(&b.real, &stage.output("synth/realworld.jsonl")?)?;
    save_corpus(&b.unreal, &stage.output("synth/unrealistic.jsonl")?)?;
    save_embeddings(&b.real_embeddings, &stage.output("synth/realworld.emb")?)?;
    save_embeddings(&b.unreal_embeddings, &stage.output("synth/unrealistic.emb")?)?;
    let ids: Vec<&String> = b.realistic_ids.iter().collect();
    save_id_list(&ids, &stage.output("synth/realistic_ids.txt")?)?;
    write_json(&stage.output("synth/params.json")?, &cfg.synth)?;
    stage.commit(&cfg.digest(), cfg.synth.seed, BTreeMap::new())?;
    Ok(())
}

pub fn all(ws: &Workspace, cfg: &PipelineConfig) -> Result<(), CliError> {
    ingest(ws, cfg)?;
    dedup_stage(ws, cfg)?;
    embed(ws, cfg)?;
    index(ws, cfg)?;
    distances(ws, cfg)?;
    select(ws, cfg)?;
    report(ws, cfg)?;
    eval(ws, cfg)
}
