use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{Model, Scratch};
use crate::dataset::{Features, LabeledDataset};
use crate::error::{Error, Result};
use crate::losses::{LossSpec, PreparedLoss};
use crate::rng::{self, Purpose};
use crate::smear::argmax_label;

/// Batch losses above this abort training.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub nesterov: bool,
    /// Coefficient `c` of the `(c / 2) * ||W||^2` penalty; biases are exempt.
    pub weight_decay: f64,
    pub lr_drop_epochs: Vec<usize>,
    pub lr_drop_factor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 0.1,
            momentum: 0.9,
            nesterov: true,
            weight_decay: 1e-4,
            lr_drop_epochs: vec![60, 80],
            lr_drop_factor: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be finite and non-negative");
        }
        if !(self.lr_drop_factor > 0.0 && self.lr_drop_factor.is_finite()) {
            return bad("lr_drop_factor must be positive");
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let drops = self.lr_drop_epochs.iter().filter(|e| epoch >= **e).count();
        self.learning_rate * self.lr_drop_factor.powi(drops as i32)
    }
}

/// Per-example differentiable objective on model logits.
pub trait Objective: Sync {
    fn num_classes(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Loss of example `i` at logits `f`; gradient with respect to `f` goes in `grad`.
    fn loss_grad(&self, i: usize, f: &[f64], grad: &mut [f64]) -> f64;
    /// The label a prediction is scored against for training accuracy.
    fn reference_label(&self, i: usize) -> usize;
}

/// Hard labels paired with a prepared (smeared or corrected) loss.
pub struct LabelObjective<'a> {
    pub loss: PreparedLoss,
    pub labels: &'a [usize],
}

impl<'a> LabelObjective<'a> {
    pub fn new(spec: &LossSpec, data: &'a LabeledDataset) -> Result<Self> {
        Ok(Self {
            loss: spec.prepare(data.num_classes())?,
            labels: data.observed_labels(),
        })
    }
}

impl Objective for LabelObjective<'_> {
    fn num_classes(&self) -> usize {
        self.loss.num_classes()
    }
    fn len(&self) -> usize {
        self.labels.len()
    }
    #[inline]
    fn loss_grad(&self, i: usize, f: &[f64], grad: &mut [f64]) -> f64 {
        self.loss.loss_grad(self.labels[i], f, grad)
    }
    fn reference_label(&self, i: usize) -> usize {
        self.labels[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// `epoch,train_loss,train_acc,test_acc`; `test_acc` is empty when no
    /// evaluation set was given.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "train_acc", "test_acc"])?;
        for r in &self.epochs {
            w.write_record([
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.train_acc.to_string(),
                r.test_acc.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_arch(model: &Model, features: &Features, classes: usize) -> Result<()> {
    if model.input_dim() != features.cols() {
        return Err(Error::ArchitectureMismatch(format!(
            "model expects {} features, data has {}",
            model.input_dim(),
            features.cols()
        )));
    }
    if model.num_classes() != classes {
        return Err(Error::ArchitectureMismatch(format!(
            "model has {} outputs, objective has {} classes",
            model.num_classes(),
            classes
        )));
    }
    Ok(())
}

/// Fraction of rows whose argmax logit equals `labels[i]`.
pub fn accuracy(model: &Model, features: &Features, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let mut f = vec![0.0; model.num_classes()];
    let mut scratch = Scratch::default();
    let hits = features
        .iter_rows()
        .zip(labels)
        .filter(|(x, y)| {
            model.forward_into(x, &mut f, &mut scratch);
            argmax_label(&f) == **y
        })
        .count();
    hits as f64 / labels.len() as f64
}

/// Minibatch SGD with (Nesterov) momentum on the mean objective plus
/// `(weight_decay / 2) * ||W||^2`.
///
/// The epoch-`e` shuffle draws from its own RNG stream, so runs are
/// bit-reproducible for a fixed config. `eval` (features, true labels) is
/// scored after every epoch.
pub fn fit(
    model: Model,
    features: &Features,
    objective: &dyn Objective,
    config: &TrainConfig,
    eval: Option<(&Features, &[usize])>,
) -> Result<(Model, History)> {
    config.validate()?;
    let n = features.rows();
    if n == 0 {
        return Err(Error::EmptyInput("training set"));
    }
    if objective.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: objective.len(),
        });
    }
    check_arch(&model, features, objective.num_classes())?;

    let mut model = model;
    let mut grads = model.zeros_like();
    let mut velocity = model.zeros_like();
    let l = model.num_classes();
    let mut logits = vec![0.0; l];
    let mut dlogits = vec![0.0; l];
    let mut scratch = Scratch::default();
    let mut order: Vec<usize> = (0..n).collect();
    let shuffle_key = rng::derive(config.seed, Purpose::Shuffle);
    let mut history = History::default();

    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        order.sort_unstable();
        order.shuffle(&mut rng::stream(shuffle_key, epoch as u64));
        let mut epoch_loss = 0.0;
        let mut hits = 0usize;

        for batch in order.chunks(config.batch_size) {
            for (g, _) in grads.blocks_mut() {
                g.fill(0.0);
            }
            let mut batch_loss = 0.0;
            for &i in batch {
                let x = features.row(i);
                model.forward_into(x, &mut logits, &mut scratch);
                if argmax_label(&logits) == objective.reference_label(i) {
                    hits += 1;
                }
                batch_loss += objective.loss_grad(i, &logits, &mut dlogits);
                model.backward(x, &dlogits, &mut grads, &mut scratch);
            }
            let mean = batch_loss / batch.len() as f64;
            if !mean.is_finite() || mean > DIVERGENCE_LIMIT {
                return Err(Error::Divergence { epoch, loss: mean });
            }
            epoch_loss += batch_loss;

            let scale = 1.0 / batch.len() as f64;
            let params = model.blocks_mut();
            let gblocks = grads.blocks_mut();
            let vblocks = velocity.blocks_mut();
            for (((p, decay), (g, _)), (v, _)) in params.into_iter().zip(gblocks).zip(vblocks) {
                let wd = if decay { config.weight_decay } else { 0.0 };
                for ((pv, gv), vv) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                    let step = gv * scale + wd * *pv;
                    *vv = config.momentum * *vv + step;
                    let dir = if config.nesterov {
                        step + config.momentum * *vv
                    } else {
                        *vv
                    };
                    *pv -= lr * dir;
                }
            }
        }
        if !model.is_finite() {
            return Err(Error::Divergence {
                epoch,
                loss: f64::NAN,
            });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / n as f64,
            train_acc: hits as f64 / n as f64,
            test_acc: eval.map(|(f, y)| accuracy(&model, f, y)),
        });
    }
    Ok((model, history))
}

/// Trains `model` on the observed labels of `data` with the loss in `spec`.
pub fn train(
    model: Model,
    data: &LabeledDataset,
    spec: &LossSpec,
    config: &TrainConfig,
) -> Result<(Model, History)> {
    let objective = LabelObjective::new(spec, data)?;
    fit(model, data.features(), &objective, config, None)
}

/// Like [`train`], additionally scoring `test` (against its true labels) per epoch.
pub fn train_with_eval(
    model: Model,
    data: &LabeledDataset,
    spec: &LossSpec,
    config: &TrainConfig,
    test: &LabeledDataset,
) -> Result<(Model, History)> {
    let objective = LabelObjective::new(spec, data)?;
    fit(
        model,
        data.features(),
        &objective,
        config,
        Some((test.features(), test.true_labels())),
    )
}

/// Full-batch objective value and its parameter gradient, penalty included.
pub fn full_batch_gradient(
    model: &Model,
    features: &Features,
    objective: &dyn Objective,
    weight_decay: f64,
) -> (f64, Model) {
    let n = features.rows();
    let l = model.num_classes();
    let mut grads = model.zeros_like();
    let mut logits = vec![0.0; l];
    let mut dlogits = vec![0.0; l];
    let mut scratch = Scratch::default();
    let mut total = 0.0;
    for i in 0..n {
        let x = features.row(i);
        model.forward_into(x, &mut logits, &mut scratch);
        total += objective.loss_grad(i, &logits, &mut dlogits);
        model.backward(x, &dlogits, &mut grads, &mut scratch);
    }
    let scale = 1.0 / n as f64;
    for ((g, decay), (p, _)) in grads.blocks_mut().into_iter().zip(model.blocks()) {
        for (gv, pv) in g.iter_mut().zip(p) {
            *gv *= scale;
            if decay {
                *gv += weight_decay * pv;
            }
        }
    }
    let value = total * scale + 0.5 * weight_decay * model.decayed_norm_sq();
    (value, grads)
}
