use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// `f(x) = W x + b`, with `W` stored `L x D`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: DMatrix<f64>,
    pub bias: Option<Vec<f64>>,
}

impl LinearModel {
    pub fn zeros(num_classes: usize, dim: usize, with_bias: bool) -> Self {
        Self {
            weights: DMatrix::zeros(num_classes, dim),
            bias: with_bias.then(|| vec![0.0; num_classes]),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }
}

/// One hidden rectifier layer: `W2 relu(W1 x + b1) + b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub hidden_weights: DMatrix<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: DMatrix<f64>,
    pub output_bias: Vec<f64>,
}

impl MlpModel {
    pub fn zeros(num_classes: usize, dim: usize, hidden: usize) -> Self {
        Self {
            hidden_weights: DMatrix::zeros(hidden, dim),
            hidden_bias: vec![0.0; hidden],
            output_weights: DMatrix::zeros(num_classes, hidden),
            output_bias: vec![0.0; num_classes],
        }
    }

    /// Weights drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases zero.
    pub fn init(num_classes: usize, dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::InvalidConfig("MLP needs at least one hidden unit".into()));
        }
        let mut r = rng::stream(rng::derive(seed, Purpose::Init), 0);
        let mut fill = |rows: usize, cols: usize| {
            let bound = 1.0 / (cols as f64).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| r.random_range(-bound..bound))
        };
        let hidden_weights = fill(hidden, dim);
        let output_weights = fill(num_classes, hidden);
        Ok(Self {
            hidden_weights,
            hidden_bias: vec![0.0; hidden],
            output_weights,
            output_bias: vec![0.0; num_classes],
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_weights.nrows()
    }

    /// Penultimate-layer activations `relu(W1 x + b1)`.
    pub fn prelogits(&self, x: &[f64]) -> Vec<f64> {
        let mut h = self.hidden_bias.clone();
        gemv_acc(&self.hidden_weights, x, &mut h);
        for v in h.iter_mut() {
            *v = v.max(0.0);
        }
        h
    }
}

/// `out += A x` for column-major `A`.
#[inline]
fn gemv_acc(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let rows = a.nrows();
    for (col, xv) in a.as_slice().chunks_exact(rows).zip(x) {
        if *xv != 0.0 {
            for (o, w) in out.iter_mut().zip(col) {
                *o += w * xv;
            }
        }
    }
}

/// `A += g x^T` for column-major `A`.
#[inline]
fn outer_acc(a: &mut DMatrix<f64>, g: &[f64], x: &[f64]) {
    let rows = a.nrows();
    for (col, xv) in a.as_mut_slice().chunks_exact_mut(rows).zip(x) {
        if *xv != 0.0 {
            for (w, gv) in col.iter_mut().zip(g) {
                *w += gv * xv;
            }
        }
    }
}

/// Model family to instantiate, as named in experiment configs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type", deny_unknown_fields)]
pub enum Architecture {
    /// Multinomial logistic regression with a bias.
    #[default]
    Linear,
    /// One hidden rectifier layer.
    Mlp { hidden: usize },
}

impl Architecture {
    /// Fresh model: linear starts at zero, the MLP at a seeded random init.
    pub fn build(self, num_classes: usize, dim: usize, seed: u64) -> Result<Model> {
        Ok(match self {
            Architecture::Linear => LinearModel::zeros(num_classes, dim, true).into(),
            Architecture::Mlp { hidden } => MlpModel::init(num_classes, dim, hidden, seed)?.into(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Mlp(MlpModel),
}

/// Reusable buffers for a forward/backward pass.
#[derive(Clone, Debug, Default)]
pub struct Scratch {
    hidden: Vec<f64>,
    hidden_grad: Vec<f64>,
}

impl Model {
    pub fn num_classes(&self) -> usize {
        match self {
            Model::Linear(m) => m.num_classes(),
            Model::Mlp(m) => m.output_weights.nrows(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.input_dim(),
            Model::Mlp(m) => m.hidden_weights.ncols(),
        }
    }

    pub fn as_linear(&self) -> Option<&LinearModel> {
        match self {
            Model::Linear(m) => Some(m),
            Model::Mlp(_) => None,
        }
    }

    pub fn as_mlp(&self) -> Option<&MlpModel> {
        match self {
            Model::Mlp(m) => Some(m),
            Model::Linear(_) => None,
        }
    }

    /// Logits for a single input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let mut out = vec![0.0; self.num_classes()];
        self.forward_into(x, &mut out, &mut Scratch::default());
        Ok(out)
    }

    /// Unchecked forward pass; `scratch` keeps the hidden activations for
    /// a following [`Model::backward`].
    #[inline]
    pub fn forward_into(&self, x: &[f64], out: &mut [f64], scratch: &mut Scratch) {
        match self {
            Model::Linear(m) => {
                match &m.bias {
                    Some(b) => out.copy_from_slice(b),
                    None => out.fill(0.0),
                }
                gemv_acc(&m.weights, x, out);
            }
            Model::Mlp(m) => {
                scratch.hidden.clear();
                scratch.hidden.extend_from_slice(&m.hidden_bias);
                gemv_acc(&m.hidden_weights, x, &mut scratch.hidden);
                for v in scratch.hidden.iter_mut() {
                    *v = v.max(0.0);
                }
                out.copy_from_slice(&m.output_bias);
                gemv_acc(&m.output_weights, &scratch.hidden, out);
            }
        }
    }

    /// Accumulates into `grads` (same architecture) the parameter gradient
    /// given `dlogits` at `x`. Must follow `forward_into` on the same `x`.
    #[inline]
    pub fn backward(&self, x: &[f64], dlogits: &[f64], grads: &mut Model, scratch: &mut Scratch) {
        match (self, grads) {
            (Model::Linear(_), Model::Linear(g)) => {
                outer_acc(&mut g.weights, dlogits, x);
                if let Some(b) = g.bias.as_mut() {
                    for (bv, d) in b.iter_mut().zip(dlogits) {
                        *bv += d;
                    }
                }
            }
            (Model::Mlp(m), Model::Mlp(g)) => {
                outer_acc(&mut g.output_weights, dlogits, &scratch.hidden);
                for (bv, d) in g.output_bias.iter_mut().zip(dlogits) {
                    *bv += d;
                }
                let h = m.hidden_dim();
                let l = m.output_weights.nrows();
                scratch.hidden_grad.clear();
                scratch.hidden_grad.resize(h, 0.0);
                for (k, col) in m.output_weights.as_slice().chunks_exact(l).enumerate() {
                    if scratch.hidden[k] > 0.0 {
                        scratch.hidden_grad[k] = col.iter().zip(dlogits).map(|(w, d)| w * d).sum();
                    }
                }
                outer_acc(&mut g.hidden_weights, &scratch.hidden_grad, x);
                for (bv, d) in g.hidden_bias.iter_mut().zip(&scratch.hidden_grad) {
                    *bv += d;
                }
            }
            _ => panic!("gradient buffer has a different architecture"),
        }
    }

    /// Same architecture, all parameters zero.
    pub fn zeros_like(&self) -> Model {
        let mut m = self.clone();
        for (block, _) in m.blocks_mut() {
            block.fill(0.0);
        }
        m
    }

    /// Parameter blocks paired with whether weight decay applies to them.
    pub fn blocks(&self) -> Vec<(&[f64], bool)> {
        match self {
            Model::Linear(m) => {
                let mut v = vec![(m.weights.as_slice(), true)];
                if let Some(b) = &m.bias {
                    v.push((b.as_slice(), false));
                }
                v
            }
            Model::Mlp(m) => vec![
                (m.hidden_weights.as_slice(), true),
                (m.hidden_bias.as_slice(), false),
                (m.output_weights.as_slice(), true),
                (m.output_bias.as_slice(), false),
            ],
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<(&mut [f64], bool)> {
        match self {
            Model::Linear(m) => {
                let mut v = vec![(m.weights.as_mut_slice(), true)];
                if let Some(b) = m.bias.as_mut() {
                    v.push((b.as_mut_slice(), false));
                }
                v
            }
            Model::Mlp(m) => vec![
                (m.hidden_weights.as_mut_slice(), true),
                (m.hidden_bias.as_mut_slice(), false),
                (m.output_weights.as_mut_slice(), true),
                (m.output_bias.as_mut_slice(), false),
            ],
        }
    }

    /// Squared l2 norm of the decayed (non-bias) parameters.
    pub fn decayed_norm_sq(&self) -> f64 {
        self.blocks()
            .into_iter()
            .filter(|(_, d)| *d)
            .flat_map(|(b, _)| b.iter())
            .map(|v| v * v)
            .sum()
    }

    /// All parameters flattened in block order.
    pub fn flat(&self) -> Vec<f64> {
        self.blocks().into_iter().flat_map(|(b, _)| b.iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(b, _)| b.iter().all(|v| v.is_finite()))
    }
}

impl From<LinearModel> for Model {
    fn from(m: LinearModel) -> Self {
        Model::Linear(m)
    }
}

impl From<MlpModel> for Model {
    fn from(m: MlpModel) -> Self {
        Model::Mlp(m)
    }
}
