use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::{DistillBlock, ExperimentConfig};
use super::run::{build_trials, run_grid, seeded, RunRecord, Trial};
use crate::csvio;
use crate::distill::{self, DistillSetup, DistillTrial, DistillVariant, MethodScores, SweepPoint};
use crate::error::{Error, Result};
use crate::losses::{self, LossSpec, MarginGrid};
use crate::metrics::{self, GapScale, LabelSource, Split};
use crate::noise;
use crate::smear::TransitionMatrix;
use crate::synthlab;
use crate::training;

/// `margin,smoothing,backward,forward`: binary losses for label 0 at
/// logits `[m, 0]`, each at strength `alpha`.
pub fn write_loss_curves_csv<W: Write>(out: W, grid: &MarginGrid, alpha: f64) -> Result<()> {
    let specs = [
        LossSpec::smoothing(alpha)?,
        LossSpec::backward_symmetric(2, alpha)?,
        LossSpec::forward_symmetric(2, alpha)?,
    ];
    let curves: Vec<Vec<(f64, f64)>> = specs
        .iter()
        .map(|s| losses::loss_curve(s, 0, grid))
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["margin", "smoothing", "backward", "forward"])?;
    for ((&(m, ls), &(_, bc)), &(_, fc)) in curves[0].iter().zip(&curves[1]).zip(&curves[2]) {
        w.write_record([m.to_string(), ls.to_string(), bc.to_string(), fc.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn run_stem(r: &RunRecord) -> String {
    let alpha = r.method.alpha_label();
    let alpha = if alpha.is_empty() { "t".to_string() } else { alpha };
    format!("{}_{}_seed{}", r.method.kind.name(), alpha, r.seed)
}

/// The four (split, label source) gap files for one run.
pub const GAP_FILES: [(Split, LabelSource); 4] = [
    (Split::Clean, LabelSource::Observed),
    (Split::Clean, LabelSource::Clean),
    (Split::Noisy, LabelSource::Observed),
    (Split::Noisy, LabelSource::Clean),
];

fn write_gap_files(dir: &Path, trial: &Trial, run: &RunRecord, scale: GapScale) -> Result<Vec<PathBuf>> {
    let Some(model) = &run.model else {
        return Ok(Vec::new());
    };
    let mut written = Vec::new();
    for (split, source) in GAP_FILES {
        let gaps = metrics::logit_gaps(model, &trial.train, source, split, scale)?;
        let path = dir.join(format!("gaps_{}_{}_{}.csv", run_stem(run), split.name(), source.name()));
        let meta = [("table", "gaps".to_string()), ("scale", format!("{scale:?}").to_lowercase())];
        metrics::write_gaps_csv(csvio::create_output(&path, &meta)?, &gaps)?;
        written.push(path);
    }
    Ok(written)
}

/// Resolved distillation settings for a config.
pub fn distill_setup(cfg: &ExperimentConfig) -> (DistillBlock, DistillSetup) {
    let block = cfg.distill.clone().unwrap_or_default();
    let setup = DistillSetup {
        arch: cfg.model,
        temperature: block.temperature,
        alpha: block.alpha,
        teacher_train: block.teacher_train.clone().unwrap_or_else(|| cfg.train.clone()),
        student_train: block.student_train.clone().unwrap_or_else(|| cfg.train.clone()),
    };
    (block, setup)
}

fn distill_trials(trials: &[Trial]) -> Vec<DistillTrial> {
    trials
        .iter()
        .map(|t| DistillTrial {
            seed: t.seed,
            train: t.train.clone(),
            test: t.test.clone(),
        })
        .collect()
}

pub struct FigureFiles {
    pub files: Vec<PathBuf>,
}

/// Writes `loss_curves.csv`, four gap files per run, projections for MLP
/// runs, `figure5.csv` with its separators and data, and `alpha_sweep.csv`.
pub fn emit_figures(cfg: &ExperimentConfig, out_dir: &Path) -> Result<FigureFiles> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let fig = &cfg.figures;

    let path = out_dir.join("loss_curves.csv");
    let meta = [("table", "loss_curves".to_string()), ("alpha", fig.loss_alpha.to_string())];
    write_loss_curves_csv(csvio::create_output(&path, &meta)?, &fig.margin_grid, fig.loss_alpha)?;
    files.push(path);

    let trials = build_trials(cfg)?;
    let runs = run_grid(cfg, &trials)?;
    for run in &runs {
        let trial = trials.iter().find(|t| t.seed == run.seed).expect("run seed has a trial");
        files.extend(write_gap_files(out_dir, trial, run, fig.gap_scale)?);
        if let (Some(mlp), true) = (
            run.model.as_ref().and_then(|m| m.as_mlp()),
            trial.train.num_classes() >= 3,
        ) {
            let points = metrics::prelogit_projection(mlp, &trial.train, fig.projection_classes)?;
            let path = out_dir.join(format!("projection_{}.csv", run_stem(run)));
            let meta = [("table", "projection".to_string())];
            metrics::write_projection_csv(csvio::create_output(&path, &meta)?, &points)?;
            files.push(path);
        }
    }

    let f5 = synthlab::figure5_experiment(&fig.figure5)?;
    let t = fig.figure5.transition()?;
    let meta = [("table", "figure5".to_string()), ("noise", transition_tag(&t))];
    let path = out_dir.join("figure5.csv");
    synthlab::write_figure5_csv(csvio::create_output(&path, &meta)?, &f5)?;
    files.push(path);
    let path = out_dir.join("figure5_separators.csv");
    synthlab::write_separators_csv(csvio::create_output(&path, &meta)?, &f5)?;
    files.push(path);
    let seed = fig.figure5.seeds[0];
    let clean = synthlab::make_blobs(&synthlab::symmetric_pair(
        2,
        fig.figure5.variance,
        fig.figure5.samples_per_class,
        seed,
    ))?;
    let noisy = noise::inject_class_conditional(&clean, &t, seed)?;
    let path = out_dir.join("figure5_data.csv");
    csvio::write_dataset(csvio::create_output(&path, &meta)?, &noisy)?;
    files.push(path);

    let (block, setup) = distill_setup(cfg);
    let sweep = distill::teacher_alpha_sweep(&block.sweep_alphas, &distill_trials(&trials), &setup)?;
    let path = out_dir.join("alpha_sweep.csv");
    let meta = [("table", "alpha_sweep".to_string()), ("temperature", "1".to_string())];
    distill::write_sweep_csv(csvio::create_output(&path, &meta)?, &sweep)?;
    files.push(path);
    Ok(FigureFiles { files })
}

/// Row-major `T`, rows separated by `;`, for metadata lines.
fn transition_tag(t: &TransitionMatrix) -> String {
    let rows: Vec<String> = (0..t.num_classes())
        .map(|i| t.row(i).iter().map(f64::to_string).collect::<Vec<_>>().join(","))
        .collect();
    format!("T[{}]", rows.join(";"))
}

pub struct DistillResults {
    pub comparison: Vec<MethodScores>,
    pub sweep: Vec<SweepPoint>,
}

/// The five-way teacher/student comparison (`distill.csv`) and the
/// temperature-1 teacher smoothing sweep (`alpha_sweep.csv`).
pub fn run_distill(cfg: &ExperimentConfig, out_dir: &Path) -> Result<DistillResults> {
    cfg.validate()?;
    let (block, setup) = distill_setup(cfg);
    if !(block.temperature > 0.0 && block.temperature.is_finite()) {
        return Err(Error::InvalidTemperature(block.temperature));
    }
    let trials = distill_trials(&build_trials(cfg)?);
    let comparison = distill::compare_variants(&DistillVariant::ALL, &trials, &setup)?;
    let sweep = distill::teacher_alpha_sweep(&block.sweep_alphas, &trials, &setup)?;
    std::fs::create_dir_all(out_dir)?;
    let meta = [
        ("table", "distill".to_string()),
        ("temperature", block.temperature.to_string()),
        ("alpha", block.alpha.to_string()),
    ];
    distill::write_comparison_csv(csvio::create_output(&out_dir.join("distill.csv"), &meta)?, &comparison)?;
    let meta = [("table", "alpha_sweep".to_string()), ("temperature", "1".to_string())];
    distill::write_sweep_csv(csvio::create_output(&out_dir.join("alpha_sweep.csv"), &meta)?, &sweep)?;
    Ok(DistillResults { comparison, sweep })
}

pub struct EstimateResult {
    pub seed: u64,
    pub estimated: TransitionMatrix,
    /// Observed flip frequencies of the injected noise.
    pub empirical: nalgebra::DMatrix<f64>,
    pub max_abs_error: f64,
}

/// Trains a standard-loss model on the first seed's noisy data, estimates
/// `T` from its predicted probabilities at the configured percentile, and
/// writes `estimated_t.csv` and `empirical_t.csv`.
pub fn estimate_t(cfg: &ExperimentConfig, out_dir: &Path) -> Result<EstimateResult> {
    cfg.validate()?;
    let first = ExperimentConfig {
        seeds: vec![cfg.seeds[0]],
        ..cfg.clone()
    };
    let trial = build_trials(&first)?.remove(0);
    let l = trial.train.num_classes();
    let init = cfg.model.build(l, trial.train.dim(), trial.seed)?;
    let (model, _) = training::train(init, &trial.train, &LossSpec::standard(), &seeded(&cfg.train, trial.seed))?;
    let probs = metrics::predict_probs(&model, trial.train.features());
    let estimated = noise::estimate_transition_percentile(&probs, cfg.estimate.percentile)?;
    let empirical = noise::empirical_flip_matrix(&trial.train)?;
    let max_abs_error = crate::linalg::max_abs_diff(estimated.entries(), &empirical);
    std::fs::create_dir_all(out_dir)?;
    let meta = [
        ("table", "estimated_t".to_string()),
        ("percentile", cfg.estimate.percentile.to_string()),
        ("seed", trial.seed.to_string()),
    ];
    csvio::write_matrix(csvio::create_output(&out_dir.join("estimated_t.csv"), &meta)?, estimated.entries())?;
    let meta = [("table", "empirical_t".to_string()), ("seed", trial.seed.to_string())];
    csvio::write_matrix(csvio::create_output(&out_dir.join("empirical_t.csv"), &meta)?, &empirical)?;
    Ok(EstimateResult {
        seed: trial.seed,
        estimated,
        empirical,
        max_abs_error,
    })
}
