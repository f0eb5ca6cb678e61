//! Config-driven experiment grids and the CSV files they emit.
//!
//! Four operations back the command-line verbs: [`run_experiment`]
//! (`run`), [`emit_figures`] (`figures`), [`run_distill`] (`distill`) and
//! [`estimate_t`] (`estimate-t`). Each writes into an output directory;
//! every CSV starts with a `#` metadata line and is otherwise a pure
//! function of the config.

mod config;
mod figures;
mod run;

pub use config::{
    BlobsConfig, DataSource, DistillBlock, EstimateConfig, ExperimentConfig, FiguresConfig, MethodConfig,
    NoiseConfig, NoiseMode,
};
pub use figures::{
    distill_setup, emit_figures, estimate_t, run_distill, write_loss_curves_csv, DistillResults, EstimateResult,
    FigureFiles, GAP_FILES,
};
pub use run::{
    build_trials, run_cell, run_experiment, run_grid, summarize, write_runs_csv, write_summary_csv,
    ExperimentResult, RunRecord, RunStatus, SummaryRow, Trial,
};
