//! Gaussian blob generators and the separator-shift experiment on two
//! blobs with one-sided label noise.

use std::io::Write;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Features, LabeledDataset};
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::noise;
use crate::rng::{self, Purpose};
use crate::smear::TransitionMatrix;
use crate::training::{self, LinearModel, Model, TrainConfig};

/// Isotropic Gaussian class-conditionals, one per centre.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub centers: Vec<Vec<f64>>,
    /// Per-coordinate variance.
    pub variance: f64,
    pub samples_per_class: usize,
    pub seed: u64,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.centers.len() < 2 {
            return Err(Error::InvalidConfig("need at least two blob centres".into()));
        }
        let d = self.centers[0].len();
        if d == 0 || self.centers.iter().any(|c| c.len() != d) {
            return Err(Error::InvalidConfig("blob centres must share a positive dimension".into()));
        }
        if !(self.variance >= 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidConfig("blob variance must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Samples `samples_per_class` points around each centre, class-major
/// order, labels by centre index. Class `k` draws from its own RNG stream.
pub fn make_blobs(spec: &BlobSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let d = spec.centers[0].len();
    let l = spec.centers.len();
    let key = rng::derive(spec.seed, Purpose::Data);
    let normal = Normal::new(0.0, spec.variance.sqrt()).expect("validated variance");
    let mut data = Vec::with_capacity(l * spec.samples_per_class * d);
    let mut labels = Vec::with_capacity(l * spec.samples_per_class);
    for (k, c) in spec.centers.iter().enumerate() {
        let mut r = rng::stream(key, k as u64);
        for _ in 0..spec.samples_per_class {
            data.extend(c.iter().map(|m| m + normal.sample(&mut r)));
            labels.push(k);
        }
    }
    LabeledDataset::new(Features::new(labels.len(), d, data)?, labels, l)
}

/// Centres at `±(1, ..., 1)` in `dim` dimensions; class 0 is the positive one.
pub fn symmetric_pair(dim: usize, variance: f64, samples_per_class: usize, seed: u64) -> BlobSpec {
    BlobSpec {
        centers: vec![vec![1.0; dim], vec![-1.0; dim]],
        variance,
        samples_per_class,
        seed,
    }
}

/// `num_classes` centres drawn from `N(0, spread^2 I)` in `dim` dimensions.
pub fn random_centers(num_classes: usize, dim: usize, spread: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::stream(rng::derive(seed, Purpose::Data), u64::MAX);
    let normal = Normal::new(0.0, spread).expect("finite spread");
    (0..num_classes)
        .map(|_| (0..dim).map(|_| normal.sample(&mut r)).collect())
        .collect()
}

/// Signed distance from the origin to the binary decision boundary
/// `(w0 - w1) . x + (b0 - b1) = 0`, measured along `direction`. Positive
/// when the boundary sits on the `direction` side of the origin.
pub fn separator_offset(model: &LinearModel, direction: &[f64]) -> Result<f64> {
    if model.num_classes() != 2 {
        return Err(Error::DegenerateModel("separator offset needs a 2-class model"));
    }
    if direction.len() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: direction.len(),
        });
    }
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateModel("zero direction"));
    }
    let w: Vec<f64> = (0..model.input_dim())
        .map(|j| model.weights[(0, j)] - model.weights[(1, j)])
        .collect();
    if w.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateModel("both class weight vectors are equal"));
    }
    let b = model.bias.as_ref().map_or(0.0, |b| b[0] - b[1]);
    let along: f64 = w.iter().zip(direction).map(|(a, d)| a * d / norm).sum();
    if along == 0.0 {
        return Err(Error::DegenerateModel("boundary is parallel to the direction"));
    }
    Ok(-b / along)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Figure5Config {
    pub alphas: Vec<f64>,
    pub l2_coeffs: Vec<f64>,
    pub seeds: Vec<u64>,
    pub samples_per_class: usize,
    pub variance: f64,
    /// Fraction of negatives (class 1) relabelled positive (class 0).
    pub flip_rate: f64,
    pub train: TrainConfig,
}

impl Default for Figure5Config {
    fn default() -> Self {
        Self {
            alphas: vec![0.0, 0.2, 0.4, 0.7],
            l2_coeffs: vec![0.0, 0.01, 0.1, 1.0],
            seeds: vec![0, 1, 2, 3, 4],
            samples_per_class: 500,
            variance: 0.01,
            flip_rate: 0.05,
            train: TrainConfig {
                weight_decay: 0.0,
                lr_drop_epochs: vec![60, 80],
                ..TrainConfig::default()
            },
        }
    }
}

impl Figure5Config {
    /// The one-sided noise: negatives flip to positive at `flip_rate`.
    pub fn transition(&self) -> Result<TransitionMatrix> {
        TransitionMatrix::from_rows(&[vec![1.0, 0.0], vec![self.flip_rate, 1.0 - self.flip_rate]])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure5Setting {
    /// Standard loss on the uncorrupted labels.
    Clean,
    Smoothing,
    L2,
}

impl Figure5Setting {
    pub fn name(self) -> &'static str {
        match self {
            Figure5Setting::Clean => "clean",
            Figure5Setting::Smoothing => "smoothing",
            Figure5Setting::L2 => "l2",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeparatorRun {
    pub seed: u64,
    pub normal: Vec<f64>,
    pub bias: f64,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Figure5Row {
    pub setting: Figure5Setting,
    pub value: f64,
    pub runs: Vec<SeparatorRun>,
}

impl Figure5Row {
    pub fn offset_mean(&self) -> f64 {
        crate::stats::mean(&self.runs.iter().map(|r| r.offset).collect::<Vec<_>>())
    }

    pub fn offset_std(&self) -> f64 {
        crate::stats::std_dev(&self.runs.iter().map(|r| r.offset).collect::<Vec<_>>())
    }

    pub fn abs_offset_mean(&self) -> f64 {
        crate::stats::mean(&self.runs.iter().map(|r| r.offset.abs()).collect::<Vec<_>>())
    }
}

fn fit_separator(
    data: &LabeledDataset,
    spec: &LossSpec,
    train: &TrainConfig,
    seed: u64,
) -> Result<SeparatorRun> {
    let cfg = TrainConfig {
        seed,
        ..train.clone()
    };
    let init = Model::from(LinearModel::zeros(2, data.dim(), true));
    let (model, _) = training::train(init, data, spec, &cfg)?;
    let lin = model.as_linear().expect("linear model");
    let direction = vec![1.0; data.dim()];
    let offset = separator_offset(lin, &direction)?;
    Ok(SeparatorRun {
        seed,
        normal: (0..data.dim())
            .map(|j| lin.weights[(0, j)] - lin.weights[(1, j)])
            .collect(),
        bias: lin.bias.as_ref().map_or(0.0, |b| b[0] - b[1]),
        offset,
    })
}

/// Clean-data baseline, then smoothing sweeps and l2 sweeps on the
/// one-sided-noise data, every setting over every seed.
pub fn figure5_experiment(cfg: &Figure5Config) -> Result<Vec<Figure5Row>> {
    if cfg.alphas.is_empty() || cfg.l2_coeffs.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidConfig("separator sweeps need alphas, l2 coefficients and seeds".into()));
    }
    let t = cfg.transition()?;
    let per_seed: Vec<(u64, LabeledDataset, LabeledDataset)> = cfg
        .seeds
        .iter()
        .map(|&seed| {
            let clean = make_blobs(&symmetric_pair(2, cfg.variance, cfg.samples_per_class, seed))?;
            let noisy = noise::inject_class_conditional(&clean, &t, seed)?;
            Ok((seed, clean, noisy))
        })
        .collect::<Result<_>>()?;

    let mut settings = vec![(Figure5Setting::Clean, 0.0)];
    settings.extend(cfg.alphas.iter().map(|a| (Figure5Setting::Smoothing, *a)));
    settings.extend(cfg.l2_coeffs.iter().map(|c| (Figure5Setting::L2, *c)));

    settings
        .par_iter()
        .map(|&(setting, value)| {
            let runs = per_seed
                .iter()
                .map(|(seed, clean, noisy)| match setting {
                    Figure5Setting::Clean => fit_separator(clean, &LossSpec::standard(), &cfg.train, *seed),
                    Figure5Setting::Smoothing => {
                        fit_separator(noisy, &LossSpec::smoothing(value)?, &cfg.train, *seed)
                    }
                    Figure5Setting::L2 => {
                        let train = TrainConfig {
                            weight_decay: value,
                            ..cfg.train.clone()
                        };
                        fit_separator(noisy, &LossSpec::standard(), &train, *seed)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Figure5Row {
                setting,
                value,
                runs,
            })
        })
        .collect()
}

/// `setting,alpha_or_l2,offset_mean,offset_std`.
pub fn write_figure5_csv<W: Write>(out: W, rows: &[Figure5Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["setting", "alpha_or_l2", "offset_mean", "offset_std"])?;
    for r in rows {
        w.write_record([
            r.setting.name().to_string(),
            r.value.to_string(),
            r.offset_mean().to_string(),
            r.offset_std().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (setting, seed) with the learned boundary `normal . x + bias = 0`.
pub fn write_separators_csv<W: Write>(out: W, rows: &[Figure5Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["setting", "alpha_or_l2", "seed", "normal_x", "normal_y", "bias", "offset"])?;
    for r in rows {
        for run in &r.runs {
            w.write_record([
                r.setting.name().to_string(),
                r.value.to_string(),
                run.seed.to_string(),
                run.normal[0].to_string(),
                run.normal.get(1).copied().unwrap_or(0.0).to_string(),
                run.bias.to_string(),
                run.offset.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
