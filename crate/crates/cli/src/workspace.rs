//! Output directory ownership, staged writes and run logs.
//!
//! Each stage writes into a private staging directory. Only when the stage
//! succeeds are its files renamed into place, so a failed stage leaves the
//! previous artifacts untouched. Renames stay on one filesystem because the
//! staging directory lives inside the output directory.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{CliError, Context};

pub const LOCK_FILE: &str = ".realsub.lock";
pub const RUNLOG_DIR: &str = "runlog";
pub const CACHE_DIR: &str = "cache";
const STAGING_PREFIX: &str = ".staging-";

/// Exclusive ownership of an output directory for the life of the value.
pub struct Workspace {
    root: PathBuf,
    lock: PathBuf,
}

impl Workspace {
    pub fn open(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).context(format!("cannot create {}", root.display()))?;
        let lock = root.join(LOCK_FILE);
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    CliError::config(format!(
                        "{} is locked by another run (remove {} if that run is gone)",
                        root.display(),
                        lock.display()
                    ))
                } else {
                    CliError::input(format!("cannot create {}: {e}", lock.display()))
                }
            })?;
        let _ = writeln!(f, "{}", std::process::id());
        Ok(Self {
            root: root.to_path_buf(),
            lock,
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Fails with an input-data error naming the stage that produces `rel`.
    pub fn require(&self, rel: &str, producer: &str) -> Result<PathBuf, CliError> {
        let p = self.path(rel);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError::input(format!(
                "missing {rel}; run `realsub {producer}` first"
            )))
        }
    }

    pub fn stage(&self, name: &str) -> Result<Stage<'_>, CliError> {
        let staging = self.root.join(format!("{STAGING_PREFIX}{name}"));
        if staging.exists() {
            fs::remove_dir_all(&staging).context(format!("cannot clear {}", staging.display()))?;
        }
        fs::create_dir_all(&staging).context(format!("cannot create {}", staging.display()))?;
        Ok(Stage {
            ws: self,
            name: name.to_string(),
            staging,
            started: Instant::now(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }
}

impl Drop for Workspace {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

/// Deterministic account of how a stage's outputs were derived. Written next
/// to the outputs and repeated, with timing, in the run log.
#[derive(Debug, Serialize)]
pub struct Provenance {
    pub stage: String,
    pub tool_version: &'static str,
    pub config_digest: String,
    pub seed: u64,
    /// Input path (relative to the output directory when inside it) to digest.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct RunLog<'a> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    created_at: String,
    wall_time_secs: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    notes: BTreeMap<String, serde_json::Value>,
}

pub struct Stage<'a> {
    ws: &'a Workspace,
    name: String,
    staging: PathBuf,
    started: Instant,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl Stage<'_> {
    /// Staging path for the artifact that will end up at `rel`.
    pub fn output(&mut self, rel: &str) -> Result<PathBuf, CliError> {
        let p = self.staging.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).context(format!("cannot create {}", dir.display()))?;
        }
        self.outputs.push(rel.to_string());
        Ok(p)
    }

    /// Records an input file and its digest.
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = realsub::digest::digest_file(path)?;
        let key = path
            .strip_prefix(&self.ws.root)
            .map(|p| p.to_string_lossy().into_owned())
            .unwrap_or_else(|_| path.display().to_string());
        self.inputs.insert(key, digest);
        Ok(())
    }

    /// Writes the provenance record, promotes every staged file and appends
    /// the run log.
    pub fn commit(
        self,
        config_digest: &str,
        seed: u64,
        notes: BTreeMap<String, serde_json::Value>,
    ) -> Result<Provenance, CliError> {
        let mut outputs = BTreeMap::new();
        for rel in &self.outputs {
            let digest = realsub::digest::digest_file(&self.staging.join(rel))?;
            outputs.insert(rel.clone(), digest);
        }
        let provenance = Provenance {
            stage: self.name.clone(),
            tool_version: env!("CARGO_PKG_VERSION"),
            config_digest: config_digest.to_string(),
            seed,
            inputs: self.inputs.clone(),
            outputs,
        };
        let record_rel = format!("provenance/{}.json", self.name);
        write_json(&self.staging.join(&record_rel), &provenance)?;

        for rel in self.outputs.iter().chain([&record_rel]) {
            let from = self.staging.join(rel);
            let to = self.ws.root.join(rel);
            if let Some(dir) = to.parent() {
                fs::create_dir_all(dir).context(format!("cannot create {}", dir.display()))?;
            }
            fs::rename(&from, &to).context(format!("cannot promote {}", to.display()))?;
        }
        let _ = fs::remove_dir_all(&self.staging);

        let log = RunLog {
            provenance: &provenance,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            notes,
        };
        let log_path = self.ws.root.join(RUNLOG_DIR).join(format!("{}.json", self.name));
        fs::create_dir_all(log_path.parent().unwrap()).context("cannot create run log directory")?;
        write_json(&log_path, &log)?;
        tracing::info!(stage = %self.name, secs = log.wall_time_secs, "stage complete");
        Ok(provenance)
    }
}

impl Drop for Stage<'_> {
    fn drop(&mut self) {
        // Only reached with files still staged when the stage failed.
        if self.staging.exists() {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).context(format!("cannot create {}", dir.display()))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    fs::write(path, bytes).context(format!("cannot write {}", path.display()))
}
