//! Softmax cross-entropy and its smeared and corrected variants.
//!
//! Every loss here works on a raw logit slice `f` of length `L` and exposes
//! an exact gradient with respect to `f`, which is all the trainers need.

use std::fmt;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::smear::{self, SmearingMatrix, TransitionMatrix};

/// Forward-corrected probabilities are clamped from below at this value.
pub const LOG_FLOOR: f64 = 1e-300;

static LOG_CLAMPS: AtomicU64 = AtomicU64::new(0);

/// How many times a forward-corrected probability hit [`LOG_FLOOR`] in this
/// process.
pub fn log_clamp_count() -> u64 {
    LOG_CLAMPS.load(Ordering::Relaxed)
}

/// Finite logit vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("logit vector"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite logit".into()));
        }
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for LogitVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn log_sum_exp(f: &[f64]) -> f64 {
    let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + f.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Writes `softmax(f)` into `out`.
pub fn softmax_into(f: &[f64], out: &mut [f64]) {
    let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, v) in out.iter_mut().zip(f) {
        *o = (v - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub fn softmax(f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    softmax_into(f, &mut out);
    out
}

fn check_index(y: usize, l: usize) -> Result<()> {
    if y >= l {
        return Err(Error::IndexOutOfRange {
            index: y,
            classes: l,
        });
    }
    Ok(())
}

fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// `-f_y + log sum_y' exp(f_y')`.
pub fn ce_loss(y: usize, f: &[f64]) -> Result<f64> {
    check_index(y, f.len())?;
    Ok(log_sum_exp(f) - f[y])
}

/// `sum_y' M[y, y'] * ce_loss(y', f)`. Negative entries of `M` can make this
/// negative.
pub fn smeared_loss(m: &SmearingMatrix, y: usize, f: &[f64]) -> Result<f64> {
    check_dims(m.num_classes(), f.len())?;
    check_index(y, f.len())?;
    let mut scratch = vec![0.0; f.len()];
    Ok(smeared_loss_grad(m, y, f, &mut scratch))
}

fn smeared_loss_grad(m: &SmearingMatrix, y: usize, f: &[f64], grad: &mut [f64]) -> f64 {
    let lse = log_sum_exp(f);
    let row = m.entries().row(y);
    let row_sum: f64 = row.iter().sum();
    softmax_into(f, grad);
    let mut loss = row_sum * lse;
    for ((g, w), v) in grad.iter_mut().zip(row.iter()).zip(f) {
        loss -= w * v;
        *g = row_sum * *g - w;
    }
    loss
}

/// `(1 - alpha) * 1[i = y] + alpha / L`.
pub fn smoothed_label(y: usize, num_classes: usize, alpha: f64) -> Result<Vec<f64>> {
    check_index(y, num_classes)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let base = alpha / num_classes as f64;
    Ok((0..num_classes)
        .map(|i| if i == y { 1.0 - alpha + base } else { base })
        .collect())
}

/// `-log((T^T softmax(f))_y)`, clamped at [`LOG_FLOOR`].
pub fn forward_loss(t: &TransitionMatrix, y: usize, f: &[f64]) -> Result<f64> {
    check_dims(t.num_classes(), f.len())?;
    check_index(y, f.len())?;
    let mut scratch = vec![0.0; f.len()];
    Ok(forward_loss_grad(t, y, f, &mut scratch))
}

fn forward_loss_grad(t: &TransitionMatrix, y: usize, f: &[f64], grad: &mut [f64]) -> f64 {
    softmax_into(f, grad);
    let col = t.entries().column(y);
    let mut q: f64 = grad.iter().zip(col.iter()).map(|(p, c)| p * c).sum();
    if q < LOG_FLOOR {
        LOG_CLAMPS.fetch_add(1, Ordering::Relaxed);
        q = LOG_FLOOR;
    }
    // d/df_j of -log q = p_j - T[j, y] p_j / q
    for (g, c) in grad.iter_mut().zip(col.iter()) {
        *g -= c * *g / q;
    }
    -q.ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Standard,
    Smoothing,
    Backward,
    Forward,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Standard => "standard",
            LossKind::Smoothing => "smoothing",
            LossKind::Backward => "backward",
            LossKind::Forward => "forward",
        }
    }

    /// Short tag used in result tables.
    pub fn tag(self) -> &'static str {
        match self {
            LossKind::Standard => "baseline",
            LossKind::Smoothing => "LS",
            LossKind::Backward => "BC",
            LossKind::Forward => "FC",
        }
    }
}

/// Which loss to train with. Backward and forward correction carry the
/// transition matrix they correct for.
#[derive(Clone, Debug, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub alpha: f64,
    pub transition: Option<TransitionMatrix>,
}

impl LossSpec {
    pub fn standard() -> Self {
        Self {
            kind: LossKind::Standard,
            alpha: 0.0,
            transition: None,
        }
    }

    pub fn smoothing(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(Self {
            kind: LossKind::Smoothing,
            alpha,
            transition: None,
        })
    }

    pub fn backward(t: TransitionMatrix) -> Self {
        Self {
            kind: LossKind::Backward,
            alpha: t.symmetric_alpha().unwrap_or(f64::NAN),
            transition: Some(t),
        }
    }

    pub fn forward(t: TransitionMatrix) -> Self {
        Self {
            kind: LossKind::Forward,
            alpha: t.symmetric_alpha().unwrap_or(f64::NAN),
            transition: Some(t),
        }
    }

    /// Backward correction for `T = (1 - alpha) I + (alpha / L) J`.
    pub fn backward_symmetric(num_classes: usize, alpha: f64) -> Result<Self> {
        let mut spec = Self::backward(TransitionMatrix::symmetric_from_alpha(num_classes, alpha)?);
        spec.alpha = alpha;
        Ok(spec)
    }

    /// Forward correction for `T = (1 - alpha) I + (alpha / L) J`.
    pub fn forward_symmetric(num_classes: usize, alpha: f64) -> Result<Self> {
        let mut spec = Self::forward(TransitionMatrix::symmetric_from_alpha(num_classes, alpha)?);
        spec.alpha = alpha;
        Ok(spec)
    }

    /// Builds the spec for `kind` with a symmetric `T` where one is needed.
    pub fn from_kind(kind: LossKind, num_classes: usize, alpha: f64) -> Result<Self> {
        match kind {
            LossKind::Standard => Ok(Self::standard()),
            LossKind::Smoothing => Self::smoothing(alpha),
            LossKind::Backward => Self::backward_symmetric(num_classes, alpha),
            LossKind::Forward => Self::forward_symmetric(num_classes, alpha),
        }
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        match self.kind {
            LossKind::Standard => Ok(()),
            LossKind::Smoothing => {
                if !(0.0..=1.0).contains(&self.alpha) {
                    return Err(Error::InvalidAlpha(self.alpha));
                }
                Ok(())
            }
            LossKind::Backward | LossKind::Forward => {
                let t = self.transition.as_ref().ok_or(Error::InvalidLossSpec {
                    kind: self.kind.name(),
                    what: "a transition matrix",
                })?;
                check_dims(num_classes, t.num_classes())
            }
        }
    }

    /// Precomputes the matrix the loss needs for `num_classes` classes.
    pub fn prepare(&self, num_classes: usize) -> Result<PreparedLoss> {
        self.validate(num_classes)?;
        Ok(match self.kind {
            LossKind::Standard => PreparedLoss::Smeared(SmearingMatrix::standard(num_classes)?),
            LossKind::Smoothing => {
                PreparedLoss::Smeared(smear::make_smoothing_matrix(num_classes, self.alpha)?)
            }
            LossKind::Backward => PreparedLoss::Smeared(smear::make_backward_matrix(
                self.transition.as_ref().expect("validated"),
            )?),
            LossKind::Forward => {
                PreparedLoss::Forward(self.transition.clone().expect("validated"))
            }
        })
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LossKind::Standard => write!(f, "standard"),
            _ if self.alpha.is_nan() => write!(f, "{}(T)", self.kind.name()),
            _ => write!(f, "{}(alpha={})", self.kind.name(), self.alpha),
        }
    }
}

/// A [`LossSpec`] with its matrix built once, ready for per-example use.
#[derive(Clone, Debug)]
pub enum PreparedLoss {
    Smeared(SmearingMatrix),
    Forward(TransitionMatrix),
}

impl PreparedLoss {
    pub fn num_classes(&self) -> usize {
        match self {
            PreparedLoss::Smeared(m) => m.num_classes(),
            PreparedLoss::Forward(t) => t.num_classes(),
        }
    }

    /// Loss at `(y, f)`; writes the gradient with respect to `f` into `grad`.
    ///
    /// Callers guarantee `y < L` and `f.len() == grad.len() == L`.
    #[inline]
    pub fn loss_grad(&self, y: usize, f: &[f64], grad: &mut [f64]) -> f64 {
        debug_assert!(y < f.len() && f.len() == grad.len());
        match self {
            PreparedLoss::Smeared(m) => smeared_loss_grad(m, y, f, grad),
            PreparedLoss::Forward(t) => forward_loss_grad(t, y, f, grad),
        }
    }

    pub fn loss(&self, y: usize, f: &[f64]) -> Result<f64> {
        check_dims(self.num_classes(), f.len())?;
        check_index(y, f.len())?;
        let mut scratch = vec![0.0; f.len()];
        Ok(self.loss_grad(y, f, &mut scratch))
    }
}

/// Exact gradient of the loss selected by `spec` with respect to `f`.
pub fn grad_logits(spec: &LossSpec, y: usize, f: &[f64]) -> Result<Vec<f64>> {
    let prepared = spec.prepare(f.len())?;
    check_index(y, f.len())?;
    let mut grad = vec![0.0; f.len()];
    prepared.loss_grad(y, f, &mut grad);
    Ok(grad)
}

/// Value of the loss selected by `spec`.
pub fn spec_loss(spec: &LossSpec, y: usize, f: &[f64]) -> Result<f64> {
    spec.prepare(f.len())?.loss(y, f)
}

/// Mean over the batch of `L * logsumexp(f) - sum(f)`, i.e. the sum of the
/// per-class cross-entropies. Invariant to shifting any logit vector.
pub fn omega_regulariser(batch: &[Vec<f64>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("logit batch"));
    }
    let total: f64 = batch
        .iter()
        .map(|f| f.len() as f64 * log_sum_exp(f) - f.iter().sum::<f64>())
        .sum();
    Ok(total / batch.len() as f64)
}

/// Evenly spaced margins `m` at which binary logits `[m, 0]` are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarginGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for MarginGrid {
    fn default() -> Self {
        Self {
            lo: -10.0,
            hi: 10.0,
            points: 401,
        }
    }
}

impl MarginGrid {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => {
                let step = (self.hi - self.lo) / (n - 1) as f64;
                (0..n)
                    .map(|i| if i == n - 1 { self.hi } else { self.lo + step * i as f64 })
                    .collect()
            }
        }
    }
}

/// Samples the binary loss for label `y` along logits `[m, 0]`.
pub fn loss_curve(spec: &LossSpec, y: usize, grid: &MarginGrid) -> Result<Vec<(f64, f64)>> {
    let prepared = spec.prepare(2)?;
    check_index(y, 2)?;
    grid.values()
        .into_iter()
        .map(|m| Ok((m, prepared.loss(y, &[m, 0.0])?)))
        .collect()
}

/// Two-column CSV: a header naming the spec, then one `(margin, loss)` row per point.
pub fn write_loss_curve_csv<W: Write>(out: W, spec: &LossSpec, curve: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["margin", &spec.to_string()])?;
    for (m, v) in curve {
        w.write_record([m.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
