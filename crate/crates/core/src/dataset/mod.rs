//! Corpus data model, newline-delimited JSON ingestion and near-duplicate removal.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```text
//! {"id":"f1","text":"int main() { return 0; }","label":0,"source":"devign"}
//! ```
//!
//! `source` is optional. Files written by [`save_corpus`] are canonical: fields
//! in the order above, compact JSON, LF line endings. Loading and re-saving a
//! canonical file reproduces it byte for byte.

mod dedup;
mod tokens;

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use dedup::{dedup, DedupOutcome, DEFAULT_DEDUP_THRESHOLD};
pub use tokens::{jaccard, tokenize, truncate_to_tokens};

use crate::digest::digest_bytes;
use crate::error::{Error, Result};

/// Binary defect label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Clean = 0,
    Defective = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn is_defective(self) -> bool {
        self == Label::Defective
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Clean => Label::Defective,
            Label::Defective => Label::Clean,
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Label::Clean),
            1 => Ok(Label::Defective),
            other => Err(format!("label {other} is not 0 or 1")),
        }
    }
}

impl From<bool> for Label {
    fn from(defective: bool) -> Self {
        if defective {
            Label::Defective
        } else {
            Label::Clean
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl Sample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label,
            source: None,
        }
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    /// Large, synthetic or weakly labeled data; the pool selection draws from.
    Unrealistic,
    /// Small, manually curated real-world data; the reference set.
    Realworld,
}

impl fmt::Display for CorpusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusKind::Unrealistic => "unrealistic",
            CorpusKind::Realworld => "realworld",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub kind: CorpusKind,
    pub sample_count: usize,
    /// Digest of the canonical serialization (see [`digest_bytes`]).
    pub content_digest: String,
    /// RFC 3339 UTC timestamp.
    pub created_at: String,
    /// Jaccard threshold, when near-duplicate removal produced this corpus.
    pub dedup_threshold: Option<f64>,
}

impl CorpusManifest {
    pub fn dedup_applied(&self) -> bool {
        self.dedup_threshold.is_some()
    }

    /// Checks the stored count and digest against `samples`.
    pub fn verify(&self, samples: &[Sample]) -> Result<()> {
        if self.sample_count != samples.len() {
            return Err(Error::InvalidData(format!(
                "manifest records {} samples, corpus has {}",
                self.sample_count,
                samples.len()
            )));
        }
        let digest = digest_bytes(&canonical_bytes(samples));
        if digest != self.content_digest {
            return Err(Error::InvalidData(format!(
                "content digest mismatch: manifest {}, recomputed {digest}",
                self.content_digest
            )));
        }
        Ok(())
    }
}

/// An ordered, id-unique collection of samples. Immutable once built.
#[derive(Debug, Clone)]
pub struct Corpus {
    kind: CorpusKind,
    samples: Vec<Sample>,
    manifest: CorpusManifest,
    positions: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(kind: CorpusKind, samples: Vec<Sample>) -> Result<Self> {
        let positions = index_ids(&samples, |i| i + 1)?;
        let manifest = CorpusManifest {
            kind,
            sample_count: samples.len(),
            content_digest: digest_bytes(&canonical_bytes(&samples)),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            dedup_threshold: None,
        };
        Ok(Self {
            kind,
            samples,
            manifest,
            positions,
        })
    }

    pub(crate) fn with_dedup_threshold(mut self, threshold: f64) -> Self {
        self.manifest.dedup_threshold = Some(threshold);
        self
    }

    pub fn kind(&self) -> CorpusKind {
        self.kind
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn manifest(&self) -> &CorpusManifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.position(id).map(|i| &self.samples[i])
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// New corpus of the same kind holding the samples named by `ids`, in
    /// the order given.
    pub fn subset<S: AsRef<str>>(&self, ids: &[S]) -> Result<Corpus> {
        let samples = ids
            .iter()
            .map(|id| {
                self.get(id.as_ref())
                    .cloned()
                    .ok_or_else(|| Error::UnknownId(id.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(self.kind, samples)
    }

    /// Canonical newline-delimited JSON serialization.
    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        canonical_bytes(&self.samples)
    }
}

fn index_ids(samples: &[Sample], line_of: impl Fn(usize) -> usize) -> Result<HashMap<String, usize>> {
    let mut positions = HashMap::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        if s.id.is_empty() {
            return Err(Error::MalformedRecord {
                line: line_of(i),
                detail: "empty id".into(),
            });
        }
        if positions.insert(s.id.clone(), i).is_some() {
            return Err(Error::DuplicateId {
                id: s.id.clone(),
                line: line_of(i),
            });
        }
    }
    Ok(positions)
}

pub(crate) fn canonical_bytes(samples: &[Sample]) -> Vec<u8> {
    let mut out = Vec::new();
    for s in samples {
        serde_json::to_writer(&mut out, s).expect("serializing a sample cannot fail");
        out.push(b'\n');
    }
    out
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    text: String,
    label: i64,
    #[serde(default)]
    source: Option<String>,
}

/// Parses newline-delimited records. Blank lines are skipped; a trailing CR
/// on each line is tolerated.
pub fn parse_corpus(bytes: &[u8], kind: CorpusKind) -> Result<Corpus> {
    let mut samples = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (i, raw_line) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = i + 1;
        let raw_line = raw_line.strip_suffix(b"\r").unwrap_or(raw_line);
        let line = std::str::from_utf8(raw_line).map_err(|_| Error::InvalidUtf8 { line: line_no })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            line: line_no,
            detail: e.to_string(),
        })?;
        if rec.id.is_empty() {
            return Err(Error::MalformedRecord {
                line: line_no,
                detail: "empty id".into(),
            });
        }
        let label = match rec.label {
            0 => Label::Clean,
            1 => Label::Defective,
            value => {
                return Err(Error::InvalidLabel {
                    id: rec.id,
                    line: line_no,
                    value,
                })
            }
        };
        if seen.insert(rec.id.clone(), line_no).is_some() {
            return Err(Error::DuplicateId {
                id: rec.id,
                line: line_no,
            });
        }
        samples.push(Sample {
            id: rec.id,
            text: rec.text,
            label,
            source: rec.source,
        });
    }
    Corpus::new(kind, samples)
}

pub fn load_corpus(path: &Path, kind: CorpusKind) -> Result<Corpus> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&bytes, kind)
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    write_file(path, &corpus.to_canonical_bytes())
}

pub fn save_manifest(manifest: &CorpusManifest, path: &Path) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_file(path, &bytes)
}

/// One id per line.
pub fn save_id_list<S: AsRef<str>>(ids: &[S], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for id in ids {
        out.extend_from_slice(id.as_ref().as_bytes());
        out.push(b'\n');
    }
    write_file(path, &out)
}

pub fn load_id_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
