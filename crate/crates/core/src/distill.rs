//! Teacher/student distillation on temperature-softened teacher outputs,
//! optionally with smoothing or forward correction on either side.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dataset::{Features, LabeledDataset};
use crate::error::{Error, Result};
use crate::losses::{log_sum_exp, softmax_into, LossKind, LossSpec};
use crate::metrics::{self, RunReport};
use crate::smear::{self, TransitionMatrix};
use crate::stats;
use crate::training::{self, Architecture, Model, Objective, TrainConfig};

/// Number of ECE bins in distillation reports.
pub const ECE_BINS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct DistillConfig {
    pub temperature: f64,
    /// Loss the teacher is trained with on the noisy labels.
    pub teacher_spec: LossSpec,
    /// Applied to the student's distillation targets (smoothing, backward)
    /// or to the student's softened output (forward).
    pub student_spec: LossSpec,
    pub teacher_train: TrainConfig,
    pub student_train: TrainConfig,
}

impl DistillConfig {
    pub fn vanilla(temperature: f64, train: TrainConfig) -> Self {
        Self {
            temperature,
            teacher_spec: LossSpec::standard(),
            student_spec: LossSpec::standard(),
            teacher_train: train.clone(),
            student_train: train,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_temperature(self.temperature)?;
        self.teacher_train.validate()?;
        self.student_train.validate()
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidTemperature(t));
    }
    Ok(())
}

/// `softmax(logits / temperature)`.
pub fn soften(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    if logits.is_empty() {
        return Err(Error::EmptyInput("logits"));
    }
    let z: Vec<f64> = logits.iter().map(|v| v / temperature).collect();
    let mut p = vec![0.0; z.len()];
    softmax_into(&z, &mut p);
    Ok(p)
}

/// `N x L` softened teacher distributions on `features`.
pub fn teacher_targets(teacher: &Model, features: &Features, temperature: f64) -> Result<DMatrix<f64>> {
    check_temperature(temperature)?;
    let logits = metrics::predict_logits(teacher, features);
    let mut out = DMatrix::zeros(logits.nrows(), logits.ncols());
    let mut row = vec![0.0; logits.ncols()];
    for i in 0..logits.nrows() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = logits[(i, j)];
        }
        let p = soften(&row, temperature)?;
        for (j, v) in p.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Cross-entropy of the student's softened output against fixed soft targets.
///
/// Without forward correction the loss is `-sum_j w_j log softmax(f / T)_j`
/// with gradient `(sum(w) softmax(f / T) - w) / T`. With a transition `C`,
/// the student distribution is replaced by `C^T softmax(f / T)`.
#[derive(Clone, Debug)]
pub struct DistillObjective {
    /// `N x L`, row-major.
    targets: Vec<f64>,
    num_classes: usize,
    temperature: f64,
    transition: Option<TransitionMatrix>,
    reference: Vec<usize>,
}

impl DistillObjective {
    /// `targets` are the (softened) teacher distributions; `student_spec`
    /// smears them (standard, smoothing, backward) or forward-corrects the
    /// student output.
    pub fn new(targets: &DMatrix<f64>, temperature: f64, student_spec: &LossSpec) -> Result<Self> {
        check_temperature(temperature)?;
        let (n, l) = targets.shape();
        if n == 0 {
            return Err(Error::EmptyInput("distillation targets"));
        }
        let smearing = match student_spec.kind {
            LossKind::Forward => None,
            _ => match student_spec.prepare(l)? {
                crate::losses::PreparedLoss::Smeared(m) => Some(m),
                crate::losses::PreparedLoss::Forward(_) => None,
            },
        };
        let mut flat = Vec::with_capacity(n * l);
        let mut reference = Vec::with_capacity(n);
        for i in 0..n {
            let p: Vec<f64> = (0..l).map(|j| targets[(i, j)]).collect();
            smear::check_distribution(&p, 1e-9)?;
            reference.push(smear::argmax_label(&p));
            match &smearing {
                Some(m) => flat.extend(smear::smear_distribution(m, &p)?),
                None => flat.extend(p),
            }
        }
        Ok(Self {
            targets: flat,
            num_classes: l,
            temperature,
            transition: match student_spec.kind {
                LossKind::Forward => student_spec.transition.clone(),
                _ => None,
            },
            reference,
        })
    }

    /// Target row of example `i` after any smearing.
    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.num_classes..(i + 1) * self.num_classes]
    }
}

impl Objective for DistillObjective {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn len(&self) -> usize {
        self.reference.len()
    }

    fn loss_grad(&self, i: usize, f: &[f64], grad: &mut [f64]) -> f64 {
        let w = self.target(i);
        let t = self.temperature;
        let z: Vec<f64> = f.iter().map(|v| v / t).collect();
        softmax_into(&z, grad);
        match &self.transition {
            None => {
                let lse = log_sum_exp(&z);
                let total: f64 = w.iter().sum();
                let loss = total * lse - w.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
                for (g, wv) in grad.iter_mut().zip(w) {
                    *g = (total * *g - wv) / t;
                }
                loss
            }
            Some(c) => {
                let l = self.num_classes;
                let p: Vec<f64> = grad.to_vec();
                let q: Vec<f64> = (0..l)
                    .map(|k| (0..l).map(|j| c.get(j, k) * p[j]).sum::<f64>().max(crate::losses::LOG_FLOOR))
                    .collect();
                let loss: f64 = -w.iter().zip(&q).map(|(a, b)| a * b.ln()).sum::<f64>();
                // dL/dp_j = -sum_k w_k C[j,k] / q_k, then through the softmax.
                let dp: Vec<f64> = (0..l)
                    .map(|j| -(0..l).map(|k| w[k] * c.get(j, k) / q[k]).sum::<f64>())
                    .collect();
                let mean: f64 = p.iter().zip(&dp).map(|(a, b)| a * b).sum();
                for j in 0..l {
                    grad[j] = p[j] * (dp[j] - mean) / t;
                }
                loss
            }
        }
    }

    fn reference_label(&self, i: usize) -> usize {
        self.reference[i]
    }
}

/// Trains `student` on `data`'s features against `teacher`'s softened
/// outputs; the observed labels are never used. The report scores the
/// student at temperature 1.
pub fn distill_train(
    teacher: &Model,
    student: Model,
    data: &LabeledDataset,
    cfg: &DistillConfig,
    test: &LabeledDataset,
) -> Result<(Model, RunReport)> {
    cfg.validate()?;
    for (who, m) in [("teacher", teacher), ("student", &student)] {
        if m.input_dim() != data.dim() {
            return Err(Error::ArchitectureMismatch(format!(
                "{who} expects {} features, data has {}",
                m.input_dim(),
                data.dim()
            )));
        }
    }
    if teacher.num_classes() != student.num_classes() {
        return Err(Error::ArchitectureMismatch(format!(
            "teacher has {} outputs, student has {}",
            teacher.num_classes(),
            student.num_classes()
        )));
    }
    let targets = teacher_targets(teacher, data.features(), cfg.temperature)?;
    let objective = DistillObjective::new(&targets, cfg.temperature, &cfg.student_spec)?;
    let (model, _) = training::fit(student, data.features(), &objective, &cfg.student_train, None)?;
    let report = metrics::run_report(&model, data, test, ECE_BINS)?;
    Ok((model, report))
}

pub struct DistillOutcome {
    pub teacher: Model,
    pub teacher_report: RunReport,
    pub student: Model,
    pub student_report: RunReport,
}

/// Trains a teacher with `cfg.teacher_spec` on the noisy labels, then
/// distills a fresh student of architecture `arch` from it.
pub fn distill_pipeline(
    train: &LabeledDataset,
    test: &LabeledDataset,
    arch: Architecture,
    cfg: &DistillConfig,
) -> Result<DistillOutcome> {
    let teacher = train_teacher(train, arch, &cfg.teacher_spec, &cfg.teacher_train)?;
    let teacher_report = metrics::run_report(&teacher, train, test, ECE_BINS)?;
    let init = arch.build(train.num_classes(), train.dim(), cfg.student_train.seed ^ 0x5eed)?;
    let (student, student_report) = distill_train(&teacher, init, train, cfg, test)?;
    Ok(DistillOutcome {
        teacher,
        teacher_report,
        student,
        student_report,
    })
}

fn train_teacher(
    train: &LabeledDataset,
    arch: Architecture,
    spec: &LossSpec,
    cfg: &TrainConfig,
) -> Result<Model> {
    let init = arch.build(train.num_classes(), train.dim(), cfg.seed)?;
    Ok(training::train(init, train, spec, cfg)?.0)
}

/// The five columns of the teacher/student comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistillVariant {
    Vanilla,
    SmoothTeacher,
    SmoothStudent,
    ForwardTeacher,
    ForwardStudent,
}

impl DistillVariant {
    pub const ALL: [DistillVariant; 5] = [
        DistillVariant::Vanilla,
        DistillVariant::SmoothTeacher,
        DistillVariant::SmoothStudent,
        DistillVariant::ForwardTeacher,
        DistillVariant::ForwardStudent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistillVariant::Vanilla => "vanilla",
            DistillVariant::SmoothTeacher => "ls_teacher",
            DistillVariant::SmoothStudent => "ls_student",
            DistillVariant::ForwardTeacher => "fc_teacher",
            DistillVariant::ForwardStudent => "fc_student",
        }
    }

    /// `(teacher spec, student spec)` with smoothing or symmetric forward
    /// correction at `alpha` on the designated side.
    pub fn specs(self, num_classes: usize, alpha: f64) -> Result<(LossSpec, LossSpec)> {
        let std = LossSpec::standard;
        Ok(match self {
            DistillVariant::Vanilla => (std(), std()),
            DistillVariant::SmoothTeacher => (LossSpec::smoothing(alpha)?, std()),
            DistillVariant::SmoothStudent => (std(), LossSpec::smoothing(alpha)?),
            DistillVariant::ForwardTeacher => (LossSpec::forward_symmetric(num_classes, alpha)?, std()),
            DistillVariant::ForwardStudent => (std(), LossSpec::forward_symmetric(num_classes, alpha)?),
        })
    }
}

/// One seed's noisy training set and clean test set.
#[derive(Clone, Debug)]
pub struct DistillTrial {
    pub seed: u64,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistillSetup {
    pub arch: Architecture,
    pub temperature: f64,
    pub alpha: f64,
    pub teacher_train: TrainConfig,
    pub student_train: TrainConfig,
}

/// Student clean-test accuracy per seed, one entry per method.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodScores {
    pub method: String,
    pub accuracies: Vec<f64>,
}

impl MethodScores {
    pub fn mean(&self) -> f64 {
        stats::mean(&self.accuracies)
    }
    pub fn std_dev(&self) -> f64 {
        stats::std_dev(&self.accuracies)
    }
}

fn seeded(cfg: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..cfg.clone()
    }
}

fn student_accuracy(
    trial: &DistillTrial,
    setup: &DistillSetup,
    teacher: &Model,
    student_spec: LossSpec,
    temperature: f64,
) -> Result<f64> {
    let cfg = DistillConfig {
        temperature,
        teacher_spec: LossSpec::standard(),
        student_spec,
        teacher_train: seeded(&setup.teacher_train, trial.seed),
        student_train: seeded(&setup.student_train, trial.seed),
    };
    let init = setup
        .arch
        .build(trial.train.num_classes(), trial.train.dim(), trial.seed ^ 0x5eed)?;
    Ok(distill_train(teacher, init, &trial.train, &cfg, &trial.test)?.1.test_accuracy)
}

/// Runs every variant on every trial. Teachers trained with the same loss
/// are shared across variants within a trial.
pub fn compare_variants(
    variants: &[DistillVariant],
    trials: &[DistillTrial],
    setup: &DistillSetup,
) -> Result<Vec<MethodScores>> {
    let per_trial: Vec<Vec<f64>> = trials
        .par_iter()
        .map(|trial| {
            let l = trial.train.num_classes();
            let mut teachers: Vec<(LossSpec, Model)> = Vec::new();
            variants
                .iter()
                .map(|v| {
                    let (tspec, sspec) = v.specs(l, setup.alpha)?;
                    let idx = match teachers.iter().position(|(s, _)| *s == tspec) {
                        Some(i) => i,
                        None => {
                            let cfg = seeded(&setup.teacher_train, trial.seed);
                            let t = train_teacher(&trial.train, setup.arch, &tspec, &cfg)?;
                            teachers.push((tspec, t));
                            teachers.len() - 1
                        }
                    };
                    student_accuracy(trial, setup, &teachers[idx].1, sspec, setup.temperature)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(variants
        .iter()
        .enumerate()
        .map(|(k, v)| MethodScores {
            method: v.name().to_string(),
            accuracies: per_trial.iter().map(|r| r[k]).collect(),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub accuracies: Vec<f64>,
}

impl SweepPoint {
    pub fn mean(&self) -> f64 {
        stats::mean(&self.accuracies)
    }
}

/// For each `alpha`, trains a smoothing(alpha) teacher per trial and
/// distills a standard student from it at temperature 1.
pub fn teacher_alpha_sweep(
    alphas: &[f64],
    trials: &[DistillTrial],
    setup: &DistillSetup,
) -> Result<Vec<SweepPoint>> {
    if !alphas.contains(&0.0) {
        return Err(Error::InvalidConfig("alpha sweep must include 0".into()));
    }
    let grid: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|a| (0..trials.len()).map(move |t| (a, t)))
        .collect();
    let accs: Vec<f64> = grid
        .par_iter()
        .map(|&(a, t)| {
            let trial = &trials[t];
            let spec = LossSpec::smoothing(alphas[a])?;
            let teacher = train_teacher(
                &trial.train,
                setup.arch,
                &spec,
                &seeded(&setup.teacher_train, trial.seed),
            )?;
            student_accuracy(trial, setup, &teacher, LossSpec::standard(), 1.0)
        })
        .collect::<Result<_>>()?;
    Ok(alphas
        .iter()
        .enumerate()
        .map(|(a, alpha)| SweepPoint {
            alpha: *alpha,
            accuracies: accs[a * trials.len()..(a + 1) * trials.len()].to_vec(),
        })
        .collect())
}

/// `method,mean,stddev`.
pub fn write_comparison_csv<W: Write>(out: W, rows: &[MethodScores]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "mean", "stddev"])?;
    for r in rows {
        w.write_record([r.method.clone(), r.mean().to_string(), r.std_dev().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `alpha,mean,stddev`.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "mean", "stddev"])?;
    for r in rows {
        w.write_record([
            r.alpha.to_string(),
            r.mean().to_string(),
            stats::std_dev(&r.accuracies).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
