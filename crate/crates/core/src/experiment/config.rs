use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::csvio;
use crate::error::{Error, Result};
use crate::losses::{LossKind, LossSpec, MarginGrid};
use crate::metrics::GapScale;
use crate::noise::SymmetricMode;
use crate::synthlab::Figure5Config;
use crate::training::{Architecture, TrainConfig};

/// One JSON document describing a grid of runs. Every field has a default,
/// so `{}` is a complete config: the 5-class, 20-dimensional blob benchmark
/// at 20% resample-any noise, five seeds, a linear model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub noise: NoiseConfig,
    pub methods: Vec<MethodConfig>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub model: Architecture,
    pub ece_bins: usize,
    pub out_dir: PathBuf,
    pub distill: Option<DistillBlock>,
    pub figures: FiguresConfig,
    pub estimate: EstimateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Blobs(BlobsConfig::default()),
            noise: NoiseConfig::default(),
            methods: vec![
                MethodConfig::new(LossKind::Standard, 0.0),
                MethodConfig::new(LossKind::Smoothing, 0.1),
                MethodConfig::new(LossKind::Smoothing, 0.3),
                MethodConfig::new(LossKind::Forward, 0.1),
                MethodConfig::new(LossKind::Forward, 0.3),
                MethodConfig::new(LossKind::Backward, 0.6),
            ],
            seeds: vec![0, 1, 2, 3, 4],
            train: TrainConfig {
                epochs: 60,
                batch_size: 32,
                learning_rate: 0.1,
                weight_decay: 0.0,
                lr_drop_epochs: vec![30, 45],
                ..TrainConfig::default()
            },
            model: Architecture::Linear,
            ece_bins: 100,
            out_dir: PathBuf::from("out"),
            distill: None,
            figures: FiguresConfig::default(),
            estimate: EstimateConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.ece_bins == 0 {
            return Err(Error::Config("ece_bins must be positive".into()));
        }
        if let Architecture::Mlp { hidden: 0 } = self.model {
            return Err(Error::Config("mlp hidden size must be positive".into()));
        }
        self.train.validate()?;
        if let DataSource::Blobs(b) = &self.data {
            b.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Blobs(BlobsConfig),
    /// Datasets in the `x0..,label[,clean_label]` layout. Test labels are
    /// taken as clean; training labels are corrupted per `noise`.
    Csv {
        train: PathBuf,
        test: PathBuf,
        #[serde(default)]
        num_classes: Option<usize>,
    },
}

/// Gaussian blobs with centres drawn once from `seed`; each run seed then
/// draws its own training and test samples around them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobsConfig {
    pub num_classes: usize,
    pub dim: usize,
    /// Centre coordinates are `N(0, center_spread^2)`.
    pub center_spread: f64,
    pub variance: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

impl Default for BlobsConfig {
    fn default() -> Self {
        Self {
            num_classes: 5,
            dim: 20,
            center_spread: 0.8,
            variance: 1.0,
            train_per_class: 40,
            test_per_class: 400,
            seed: 2024,
        }
    }
}

impl BlobsConfig {
    fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.dim == 0 || self.train_per_class == 0 || self.test_per_class == 0 {
            return Err(Error::Config("blobs need >= 2 classes, a positive dim and sample counts".into()));
        }
        if !(self.variance > 0.0 && self.center_spread > 0.0) {
            return Err(Error::Config("blob variance and centre spread must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    #[default]
    ResampleAny,
    FlipToOther,
    /// Class-conditional draws from `transition_file`.
    Transition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub mode: NoiseMode,
    pub rho: f64,
    pub transition_file: Option<PathBuf>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            mode: NoiseMode::ResampleAny,
            rho: 0.2,
            transition_file: None,
        }
    }
}

impl NoiseConfig {
    pub fn symmetric_mode(&self) -> Option<SymmetricMode> {
        match self.mode {
            NoiseMode::ResampleAny => Some(SymmetricMode::ResampleAny),
            NoiseMode::FlipToOther => Some(SymmetricMode::FlipToOther),
            NoiseMode::Transition => None,
        }
    }
}

/// A loss in the method grid. Backward and forward correction use
/// `transition_file` when given, else the symmetric `T` at `alpha`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: LossKind,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition_file: Option<PathBuf>,
}

impl MethodConfig {
    pub fn new(kind: LossKind, alpha: f64) -> Self {
        Self {
            kind,
            alpha,
            transition_file: None,
        }
    }

    pub fn to_spec(&self, num_classes: usize) -> Result<LossSpec> {
        match (&self.transition_file, self.kind) {
            (Some(path), LossKind::Backward) => Ok(LossSpec::backward(csvio::read_transition_file(path)?)),
            (Some(path), LossKind::Forward) => Ok(LossSpec::forward(csvio::read_transition_file(path)?)),
            (Some(_), _) => Err(Error::Config(format!(
                "transition_file only applies to backward and forward, not {}",
                self.kind.name()
            ))),
            (None, kind) => LossSpec::from_kind(kind, num_classes, self.alpha),
        }
    }

    /// `alpha` as written in result tables; empty for a transition file.
    pub fn alpha_label(&self) -> String {
        match (&self.transition_file, self.kind) {
            (Some(_), _) => String::new(),
            (None, LossKind::Standard) => "0".into(),
            (None, _) => self.alpha.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillBlock {
    pub temperature: f64,
    /// Smoothing or forward-correction strength for the comparison table.
    pub alpha: f64,
    /// Defaults to the top-level `train`.
    pub teacher_train: Option<TrainConfig>,
    pub student_train: Option<TrainConfig>,
    pub sweep_alphas: Vec<f64>,
}

impl Default for DistillBlock {
    fn default() -> Self {
        Self {
            temperature: 2.0,
            alpha: 0.1,
            teacher_train: None,
            student_train: None,
            sweep_alphas: vec![0.0, 0.1, 0.3, 0.5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiguresConfig {
    pub margin_grid: MarginGrid,
    /// Strength of each curve in loss_curves.csv.
    pub loss_alpha: f64,
    pub gap_scale: GapScale,
    pub projection_classes: [usize; 3],
    pub figure5: Figure5Config,
}

impl Default for FiguresConfig {
    fn default() -> Self {
        Self {
            margin_grid: MarginGrid::default(),
            loss_alpha: 0.2,
            gap_scale: GapScale::Probability,
            projection_classes: [0, 1, 2],
            figure5: Figure5Config::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub percentile: f64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self { percentile: 99.9 }
    }
}
