mod config;
mod error;
mod stages;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use realsub::knn::IndexMode;

use config::{BackendKind, PipelineConfig};
use error::CliError;
use workspace::Workspace;

/// Selects the most realistic part of an unrealistic defect corpus by
/// nearest-neighbor distance to real-world samples.
///
/// Settings come from built-in defaults, overridden by the config file,
/// overridden by flags.
#[derive(Parser, Debug)]
#[command(name = "realsub", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Copy both corpora into the output directory in canonical form.
    Ingest,
    /// Remove near-duplicates (token-set Jaccard) from both corpora.
    Dedup,
    /// Embed both corpora.
    Embed,
    /// Split the real corpus and index its training part.
    Index,
    /// Nearest real-training neighbor of every unrealistic sample.
    Distances,
    /// Emit the percentile-thresholded subsets for each phi.
    Select,
    /// Distance histogram, percentile table and 2-D projection.
    Report,
    /// Linear-probe comparison of curated, random, zero and full regimes.
    Eval,
    /// Generate a synthetic benchmark under `synth/`.
    Synth,
    /// ingest, dedup, embed, index, distances, select, report and eval.
    All,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// TOML config file.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: realsub-out].
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    unrealistic: Option<PathBuf>,
    #[arg(long, global = true)]
    realworld: Option<PathBuf>,
    /// Percentiles to select, comma separated.
    #[arg(long = "phi", global = true, value_delimiter = ',')]
    phis: Vec<f64>,
    #[arg(long, global = true)]
    dedup_threshold: Option<f64>,
    #[arg(long, global = true)]
    no_dedup: bool,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    normalize: bool,
    #[arg(long, global = true)]
    unrealistic_vectors: Option<PathBuf>,
    #[arg(long, global = true)]
    realworld_vectors: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_mode)]
    index_mode: Option<IndexMode>,
    #[arg(long, global = true)]
    centroids: Option<usize>,
    #[arg(long, global = true)]
    nprobe: Option<usize>,
    #[arg(long, global = true)]
    bins: Option<usize>,
    /// Evaluation seeds, comma separated.
    #[arg(long = "eval-seeds", global = true, value_delimiter = ',')]
    eval_seeds: Vec<u64>,
    #[arg(long, global = true)]
    n_real: Option<usize>,
    #[arg(long, global = true)]
    n_unreal: Option<usize>,
    #[arg(long, global = true)]
    realistic_fraction: Option<f64>,
    #[arg(long, global = true)]
    synth_dim: Option<usize>,
    #[arg(long, global = true)]
    noise_rate: Option<f64>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
}

fn parse_mode(s: &str) -> Result<IndexMode, String> {
    match s {
        "exact" => Ok(IndexMode::Exact),
        "ivf" => Ok(IndexMode::Ivf),
        _ => Err(format!("unknown index mode {s:?} (exact or ivf)")),
    }
}

impl Overrides {
    fn apply(&self, cfg: &mut PipelineConfig) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        fn set_some<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
            if src.is_some() {
                *dst = src.clone();
            }
        }
        set_some(&mut cfg.output_dir, &self.out);
        set(&mut cfg.seed, &self.seed);
        set_some(&mut cfg.inputs.unrealistic, &self.unrealistic);
        set_some(&mut cfg.inputs.realworld, &self.realworld);
        if !self.phis.is_empty() {
            cfg.phis = self.phis.clone();
        }
        if let Some(t) = self.dedup_threshold {
            cfg.dedup.enabled = true;
            cfg.dedup.threshold = t;
        }
        if self.no_dedup {
            cfg.dedup.enabled = false;
        }
        set(&mut cfg.embed.backend, &self.backend);
        set(&mut cfg.embed.dim, &self.dim);
        cfg.embed.normalize |= self.normalize;
        set_some(&mut cfg.embed.unrealistic_vectors, &self.unrealistic_vectors);
        set_some(&mut cfg.embed.realworld_vectors, &self.realworld_vectors);
        set(&mut cfg.index.mode, &self.index_mode);
        set_some(&mut cfg.index.centroids, &self.centroids);
        set(&mut cfg.index.nprobe, &self.nprobe);
        set(&mut cfg.report.bins, &self.bins);
        if !self.eval_seeds.is_empty() {
            cfg.eval.seeds = self.eval_seeds.clone();
        }
        set(&mut cfg.synth.n_real, &self.n_real);
        set(&mut cfg.synth.n_unreal, &self.n_unreal);
        set(&mut cfg.synth.realistic_fraction, &self.realistic_fraction);
        set(&mut cfg.synth.dim, &self.synth_dim);
        set(&mut cfg.synth.noise_label_rate, &self.noise_rate);
        // One flag seeds everything, including the generator.
        set(&mut cfg.synth.seed, &self.seed);
    }
}

fn load_config(o: &Overrides) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &o.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    o.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

/// Checks the files a command reads from outside the output directory.
fn check_inputs(command: Command, cfg: &PipelineConfig) -> Result<(), CliError> {
    use realsub::dataset::CorpusKind::{Realworld, Unrealistic};
    if matches!(command, Command::Ingest | Command::All) {
        stages::input_path(cfg, Unrealistic)?;
        stages::input_path(cfg, Realworld)?;
    }
    if matches!(command, Command::Embed | Command::All) && cfg.embed.backend == BackendKind::Precomputed {
        stages::vectors_path(cfg, Unrealistic)?;
        stages::vectors_path(cfg, Realworld)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli.overrides)?;
    check_inputs(cli.command, &cfg)?;
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("realsub-out"));
    let ws = Workspace::open(&out)?;
    tracing::info!(command = ?cli.command, out = %out.display(), config = %cfg.digest(), "starting");
    match cli.command {
        Command::Ingest => stages::ingest(&ws, &cfg),
        Command::Dedup => stages::dedup_stage(&ws, &cfg),
        Command::Embed => stages::embed(&ws, &cfg),
        Command::Index => stages::index(&ws, &cfg),
        Command::Distances => stages::distances(&ws, &cfg),
        Command::Select => stages::select(&ws, &cfg),
        Command::Report => stages::report(&ws, &cfg),
        Command::Eval => stages::eval(&ws, &cfg),
        Command::Synth => stages::synth(&ws, &cfg),
        Command::All => stages::all(&ws, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", CliError::config(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    let filter = tracing_subscriber::EnvFilter::try_new(&cli.overrides.log_level)
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .init();

    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.category.exit_code() as u8)
        }
    }
}
