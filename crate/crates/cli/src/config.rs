//! Pipeline configuration: built-in defaults, then the TOML file, then
//! command-line flags.

use std::path::{Path, PathBuf};

use realsub::dataset::DEFAULT_DEDUP_THRESHOLD;
use realsub::embed::{ApiConfig, Backend, EmbedderConfig};
use realsub::eval::{GridConfig, ProbeConfig, SynthParams, DEFAULT_SPLIT};
use realsub::knn::{IndexConfig, IndexMode};
use realsub::report::DEFAULT_BINS;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Not part of the config digest, so a run can be repeated elsewhere.
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
    pub inputs: Inputs,
    pub dedup: DedupConfig,
    pub embed: EmbedSection,
    pub index: IndexSection,
    pub phis: Vec<f64>,
    pub report: ReportSection,
    pub eval: EvalSection,
    pub synth: SynthParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub unrealistic: Option<PathBuf>,
    pub realworld: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupConfig {
    pub enabled: bool,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    External,
    /// Vectors supplied as `EMB1` files, e.g. from `realsub synth`.
    Precomputed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedSection {
    pub backend: BackendKind,
    pub dim: usize,
    pub max_tokens: usize,
    pub normalize: bool,
    pub api: ApiConfig,
    pub unrealistic_vectors: Option<PathBuf>,
    pub realworld_vectors: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexSection {
    pub mode: IndexMode,
    pub centroids: Option<usize>,
    pub nprobe: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub bins: usize,
    /// Points drawn from each set for the 2-D projection.
    pub projection_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub seeds: Vec<u64>,
    pub train_share: f64,
    pub val_share: f64,
    pub probe: ProbeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 13,
            output_dir: None,
            inputs: Inputs::default(),
            dedup: DedupConfig::default(),
            embed: EmbedSection::default(),
            index: IndexSection::default(),
            phis: vec![0.1, 0.25, 0.3, 0.5, 0.75, 1.0],
            report: ReportSection::default(),
            eval: EvalSection::default(),
            synth: SynthParams::default(),
        }
    }
}

impl Default for DedupConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            threshold: DEFAULT_DEDUP_THRESHOLD,
        }
    }
}

impl Default for EmbedSection {
    fn default() -> Self {
        Self {
            backend: BackendKind::Mock,
            dim: 256,
            max_tokens: 8191,
            normalize: false,
            api: ApiConfig::default(),
            unrealistic_vectors: None,
            realworld_vectors: None,
        }
    }
}

impl Default for IndexSection {
    fn default() -> Self {
        let d = IndexConfig::default();
        Self {
            mode: d.mode,
            centroids: d.centroids,
            nprobe: d.nprobe,
            max_iterations: d.max_iterations,
            tolerance: d.tolerance,
        }
    }
}

impl Default for ReportSection {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            projection_cap: 2000,
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        let g = GridConfig::default();
        Self {
            seeds: g.seeds,
            train_share: DEFAULT_SPLIT.0,
            val_share: DEFAULT_SPLIT.1,
            probe: g.probe,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))?;
        // Relative paths inside the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut cfg.output_dir,
            &mut cfg.inputs.unrealistic,
            &mut cfg.inputs.realworld,
            &mut cfg.embed.unrealistic_vectors,
            &mut cfg.embed.realworld_vectors,
        ]
        .into_iter()
        .flatten()
        {
            rebase(p);
        }
        Ok(cfg)
    }

    /// Checks value ranges. Input paths are checked separately by the stages
    /// that read them.
    pub fn validate(&self) -> Result<(), CliError> {
        for &phi in &self.phis {
            if !(0.0..=1.0).contains(&phi) {
                return Err(CliError::config(format!("phi {phi} outside [0, 1]")));
            }
        }
        if self.phis.is_empty() {
            return Err(CliError::config("phis must not be empty"));
        }
        if !(0.0..=1.0).contains(&self.dedup.threshold) {
            return Err(CliError::config(format!(
                "dedup threshold {} outside [0, 1]",
                self.dedup.threshold
            )));
        }
        self.embedder()
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        if self.index.nprobe == 0 {
            return Err(CliError::config("index nprobe must be >= 1"));
        }
        if self.index.centroids == Some(0) {
            return Err(CliError::config("index centroids must be >= 1"));
        }
        if self.report.bins == 0 {
            return Err(CliError::config("report bins must be >= 1"));
        }
        let (t, v) = (self.eval.train_share, self.eval.val_share);
        if !(t > 0.0 && v >= 0.0 && t + v < 1.0) {
            return Err(CliError::config(format!("split shares {t}/{v} leave no test data")));
        }
        if self.eval.seeds.is_empty() {
            return Err(CliError::config("eval seeds must not be empty"));
        }
        self.eval
            .probe
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        Ok(())
    }

    pub fn embedder(&self) -> EmbedderConfig {
        let backend = match self.embed.backend {
            BackendKind::External => Backend::ExternalApi(self.embed.api.clone()),
            BackendKind::Mock | BackendKind::Precomputed => Backend::MockHash,
        };
        EmbedderConfig {
            backend,
            dim: self.embed.dim,
            max_tokens: self.embed.max_tokens,
            normalize: self.embed.normalize,
        }
    }

    pub fn index_config(&self) -> IndexConfig {
        IndexConfig {
            mode: self.index.mode,
            centroids: self.index.centroids,
            nprobe: self.index.nprobe,
            seed: self.seed,
            max_iterations: self.index.max_iterations,
            tolerance: self.index.tolerance,
        }
    }

    pub fn grid_config(&self) -> GridConfig {
        let mut phis = self.phis.clone();
        phis.sort_by(f64::total_cmp);
        phis.dedup();
        GridConfig {
            phis,
            seeds: self.eval.seeds.clone(),
            probe: self.eval.probe.clone(),
        }
    }

    /// Digest of every setting except the output directory.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        realsub::digest::digest_bytes(&json)
    }
}
