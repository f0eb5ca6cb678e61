//! Label smearing: label smoothing, backward and forward loss correction
//! viewed as one family of losses `sum_y' M[y, y'] * CE(y', f)`, plus the
//! tooling to study them under synthetic label noise.
//!
//! The modules build on each other roughly in this order:
//!
//! - [`smear`]: transition and smearing matrices
//! - [`losses`]: loss values, gradients and loss curves
//! - [`noise`]: label corruption and transition estimation
//! - [`training`]: linear and MLP models, SGD, shrinkage closed forms
//! - [`metrics`]: accuracy breakdowns, calibration, logit gaps, projections
//! - [`distill`]: teacher/student distillation
//! - [`synthlab`]: Gaussian blobs and separator geometry
//! - [`experiment`]: config-driven grids and CSV emission

pub mod csvio;
pub mod dataset;
pub mod distill;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod noise;
pub mod rng;
pub mod smear;
pub mod stats;
pub mod synthlab;
pub mod training;

/// Upper bound on the number of classes any matrix constructor accepts.
pub const MAX_CLASSES: usize = 10_000;

pub use dataset::{Features, LabeledDataset};
pub use error::{Error, Result};
pub use losses::{LossKind, LossSpec};
pub use smear::{SmearingMatrix, SmearingMethod, TransitionMatrix};
pub use training::{Architecture, Model, TrainConfig};
