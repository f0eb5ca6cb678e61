//! Models, the SGD trainer, and closed-form shrinkage analyses.

mod checkpoint;
mod model;
mod sgd;
pub mod shrinkage;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use model::{Architecture, LinearModel, MlpModel, Model, Scratch};
pub use sgd::{
    accuracy, fit, full_batch_gradient, train, train_with_eval, EpochRecord, History,
    LabelObjective, Objective, TrainConfig, DIVERGENCE_LIMIT,
};
pub use shrinkage::{closed_form_smoothed_least_squares, omega_gradient_at, omega_linear};
