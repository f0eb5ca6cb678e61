use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::{DataSource, ExperimentConfig, MethodConfig, NoiseMode};
use crate::csvio;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics::{self, RunReport};
use crate::noise;
use crate::rng::{self, Purpose};
use crate::stats;
use crate::synthlab::{self, BlobSpec};
use crate::training::{self, Model, TrainConfig};

/// One seed's corrupted training set and untouched test set.
#[derive(Clone, Debug)]
pub struct Trial {
    pub seed: u64,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Loads or generates the data for every seed and injects noise into the
/// training split. All methods of a seed share the same corrupted labels.
pub fn build_trials(cfg: &ExperimentConfig) -> Result<Vec<Trial>> {
    let transition = match (cfg.noise.mode, &cfg.noise.transition_file) {
        (NoiseMode::Transition, Some(p)) => Some(csvio::read_transition_file(p)?),
        (NoiseMode::Transition, None) => {
            return Err(Error::Config("noise mode `transition` needs transition_file".into()))
        }
        _ => None,
    };
    let loaded = match &cfg.data {
        DataSource::Csv {
            train,
            test,
            num_classes,
        } => {
            let tr = csvio::read_dataset_file(train, *num_classes)?;
            let l = num_classes.unwrap_or(tr.num_classes());
            let te = csvio::read_dataset_file(test, Some(l))?;
            let tr = if tr.num_classes() == l {
                tr
            } else {
                LabeledDataset::new(tr.features().clone(), tr.observed_labels().to_vec(), l)?
            };
            Some((tr, te))
        }
        DataSource::Blobs(_) => None,
    };
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let (clean, test) = match (&cfg.data, &loaded) {
                (_, Some((tr, te))) => (tr.cleaned(), te.cleaned()),
                (DataSource::Blobs(b), None) => {
                    let centers = synthlab::random_centers(b.num_classes, b.dim, b.center_spread, b.seed);
                    let sample_seed = rng::mix(b.seed ^ rng::mix(seed));
                    let blobs = |n, purpose| {
                        synthlab::make_blobs(&BlobSpec {
                            centers: centers.clone(),
                            variance: b.variance,
                            samples_per_class: n,
                            seed: rng::derive(sample_seed, purpose),
                        })
                    };
                    (blobs(b.train_per_class, Purpose::Data)?, blobs(b.test_per_class, Purpose::TestData)?)
                }
                _ => unreachable!("csv data is loaded up front"),
            };
            let train = match (&transition, cfg.noise.symmetric_mode()) {
                (Some(t), _) => noise::inject_class_conditional(&clean, t, seed)?,
                (None, Some(mode)) => noise::inject_symmetric(&clean, cfg.noise.rho, mode, seed)?,
                (None, None) => unreachable!("transition mode carries a matrix"),
            };
            Ok(Trial { seed, train, test })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Ok(RunReport),
    Diverged { epoch: usize, loss: f64 },
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub method: MethodConfig,
    pub seed: u64,
    pub status: RunStatus,
    pub model: Option<Model>,
}

impl RunRecord {
    pub fn report(&self) -> Option<&RunReport> {
        match &self.status {
            RunStatus::Ok(r) => Some(r),
            RunStatus::Diverged { .. } => None,
        }
    }
}

pub fn seeded(train: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..train.clone()
    }
}

/// Trains one (method, seed) cell. Divergence is a recorded outcome.
pub fn run_cell(cfg: &ExperimentConfig, method: &MethodConfig, trial: &Trial) -> Result<RunRecord> {
    let l = trial.train.num_classes();
    let spec = method.to_spec(l)?;
    let init = cfg.model.build(l, trial.train.dim(), rng::derive(trial.seed, Purpose::Init))?;
    let (status, model) = match training::train(init, &trial.train, &spec, &seeded(&cfg.train, trial.seed)) {
        Ok((model, _)) => {
            let report = metrics::run_report(&model, &trial.train, &trial.test, cfg.ece_bins)?;
            (RunStatus::Ok(report), Some(model))
        }
        Err(Error::Divergence { epoch, loss }) => (RunStatus::Diverged { epoch, loss }, None),
        Err(e) => return Err(e),
    };
    Ok(RunRecord {
        method: method.clone(),
        seed: trial.seed,
        status,
        model,
    })
}

/// Every (method, seed) cell, method-major, in config order.
pub fn run_grid(cfg: &ExperimentConfig, trials: &[Trial]) -> Result<Vec<RunRecord>> {
    let cells: Vec<(usize, usize)> = (0..cfg.methods.len())
        .flat_map(|m| (0..trials.len()).map(move |t| (m, t)))
        .collect();
    cells
        .par_iter()
        .map(|&(m, t)| run_cell(cfg, &cfg.methods[m], &trials[t]))
        .collect()
}

type Metric = (&'static str, fn(&RunReport) -> f64);

const METRICS: [Metric; 6] = [
    ("test_acc", |r| r.test_accuracy),
    ("train_full_true", |r| r.train_accuracy_full_true),
    ("train_clean_true", |r| r.train_accuracy_clean_true),
    ("train_noisy_true", |r| r.train_accuracy_noisy_true),
    ("train_noisy_observed", |r| r.train_accuracy_noisy_observed),
    ("ece", |r| r.ece),
];

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub alpha: String,
    pub runs: usize,
    pub diverged: usize,
    /// `(mean, stddev)` per metric over the converged runs, in table order.
    pub stats: Vec<(f64, f64)>,
}

impl SummaryRow {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        METRICS
            .iter()
            .position(|(n, _)| *n == metric)
            .map(|i| self.stats[i].0)
    }
}

/// One row per method, aggregated over seeds.
pub fn summarize(cfg: &ExperimentConfig, runs: &[RunRecord]) -> Vec<SummaryRow> {
    cfg.methods
        .iter()
        .map(|m| {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| &r.method == m).collect();
            let reports: Vec<&RunReport> = mine.iter().filter_map(|r| r.report()).collect();
            SummaryRow {
                method: m.kind.name().to_string(),
                alpha: m.alpha_label(),
                runs: mine.len(),
                diverged: mine.len() - reports.len(),
                stats: METRICS
                    .iter()
                    .map(|(_, get)| {
                        let xs: Vec<f64> = reports.iter().map(|r| get(r)).collect();
                        if xs.is_empty() {
                            (f64::NAN, f64::NAN)
                        } else {
                            (stats::mean(&xs), stats::std_dev(&xs))
                        }
                    })
                    .collect(),
            }
        })
        .collect()
}

/// `method,alpha,seed,status,<metrics>`; diverged rows carry empty metrics.
pub fn write_runs_csv<W: Write>(out: W, runs: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["method", "alpha", "seed", "status"];
    header.extend(METRICS.iter().map(|(n, _)| *n));
    w.write_record(&header)?;
    for r in runs {
        let mut rec = vec![
            r.method.kind.name().to_string(),
            r.method.alpha_label(),
            r.seed.to_string(),
        ];
        match &r.status {
            RunStatus::Ok(rep) => {
                rec.push("ok".into());
                rec.extend(METRICS.iter().map(|(_, get)| get(rep).to_string()));
            }
            RunStatus::Diverged { epoch, .. } => {
                rec.push(format!("diverged@{epoch}"));
                rec.extend(METRICS.iter().map(|_| String::new()));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `method,alpha,runs,diverged,<metric>_mean,<metric>_std,...`
pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["method", "alpha", "runs", "diverged"].map(String::from).to_vec();
    for (n, _) in METRICS {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_std"));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.method.clone(), r.alpha.clone(), r.runs.to_string(), r.diverged.to_string()];
        for (m, s) in &r.stats {
            rec.push(m.to_string());
            rec.push(s.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Builds trials, runs the grid and writes `runs.csv` and `summary.csv`
/// into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentResult> {
    cfg.validate()?;
    let trials = build_trials(cfg)?;
    let runs = run_grid(cfg, &trials)?;
    let summary = summarize(cfg, &runs);
    std::fs::create_dir_all(out_dir)?;
    let meta = [("table", "runs".to_string())];
    write_runs_csv(csvio::create_output(&out_dir.join("runs.csv"), &meta)?, &runs)?;
    let meta = [("table", "summary".to_string())];
    write_summary_csv(csvio::create_output(&out_dir.join("summary.csv"), &meta)?, &summary)?;
    Ok(ExperimentResult { runs, summary })
}
