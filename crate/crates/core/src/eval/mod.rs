//! Linear-probe evaluation of curated, random, zero and full training
//! regimes, plus a synthetic benchmark with known ground truth.

mod grid;
mod metrics;
mod probe;
mod synth;

pub use grid::{
    run_regime_grid, split_corpus, summarize, write_results_csv, write_summary_csv, EvalResult, GridConfig, GridInputs,
    Regime, RegimeSummary, SplitSpec, DEFAULT_SPLIT,
};
pub use metrics::{evaluate, Confusion, Metrics};
pub use probe::{continue_training, train_probe, Probe, ProbeConfig};
pub use synth::{synth_benchmark, SynthBenchmark, SynthParams, CLASS_OFFSET, JUNK_OFFSET};
