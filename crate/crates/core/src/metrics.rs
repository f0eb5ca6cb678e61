//! Accuracy breakdowns, calibration, confidence gaps and pre-logit projections.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{Features, LabeledDataset};
use crate::error::{Error, Result};
use crate::losses::softmax_into;
use crate::smear::argmax_label;
use crate::training::{MlpModel, Model, Scratch};

/// Accuracies against true labels on the full, clean and noisy parts of a
/// corrupted training set, plus the fit to the noisy labels themselves.
///
/// A part with no examples reports accuracy 0. A dataset without clean
/// labels counts as entirely clean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBreakdown {
    pub full_true: f64,
    pub clean_true: f64,
    pub noisy_true: f64,
    pub noisy_observed: f64,
    pub n_clean: usize,
    pub n_noisy: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub test_accuracy: f64,
    pub train_accuracy_full_true: f64,
    pub train_accuracy_clean_true: f64,
    pub train_accuracy_noisy_true: f64,
    pub train_accuracy_noisy_observed: f64,
    pub ece: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gap_samples: Option<Vec<f64>>,
}

/// Argmax class of every row.
pub fn predict(model: &Model, features: &Features) -> Vec<usize> {
    let mut f = vec![0.0; model.num_classes()];
    let mut scratch = Scratch::default();
    features
        .iter_rows()
        .map(|x| {
            model.forward_into(x, &mut f, &mut scratch);
            argmax_label(&f)
        })
        .collect()
}

/// `N x L` matrix of raw logits.
pub fn predict_logits(model: &Model, features: &Features) -> DMatrix<f64> {
    let l = model.num_classes();
    let mut out = DMatrix::zeros(features.rows(), l);
    let mut f = vec![0.0; l];
    let mut scratch = Scratch::default();
    for (i, x) in features.iter_rows().enumerate() {
        model.forward_into(x, &mut f, &mut scratch);
        for (j, v) in f.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    out
}

/// `N x L` matrix of softmax probabilities.
pub fn predict_probs(model: &Model, features: &Features) -> DMatrix<f64> {
    let l = model.num_classes();
    let mut out = DMatrix::zeros(features.rows(), l);
    let mut f = vec![0.0; l];
    let mut p = vec![0.0; l];
    let mut scratch = Scratch::default();
    for (i, x) in features.iter_rows().enumerate() {
        model.forward_into(x, &mut f, &mut scratch);
        softmax_into(&f, &mut p);
        for (j, v) in p.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    out
}

fn fraction(hits: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

/// Breakdown from precomputed predictions.
pub fn breakdown_from_predictions(
    predictions: &[usize],
    data: &LabeledDataset,
) -> Result<AccuracyBreakdown> {
    let clean = data.true_labels();
    let no_noise = vec![false; data.len()];
    let mask = data.noise_mask().unwrap_or(&no_noise);
    if predictions.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            actual: predictions.len(),
        });
    }
    let observed = data.observed_labels();
    let (mut full, mut clean_hits, mut noisy_true, mut noisy_obs) = (0, 0, 0, 0);
    let mut n_noisy = 0;
    for i in 0..data.len() {
        let right = predictions[i] == clean[i];
        full += right as usize;
        if mask[i] {
            n_noisy += 1;
            noisy_true += right as usize;
            noisy_obs += (predictions[i] == observed[i]) as usize;
        } else {
            clean_hits += right as usize;
        }
    }
    let n_clean = data.len() - n_noisy;
    Ok(AccuracyBreakdown {
        full_true: fraction(full, data.len()),
        clean_true: fraction(clean_hits, n_clean),
        noisy_true: fraction(noisy_true, n_noisy),
        noisy_observed: fraction(noisy_obs, n_noisy),
        n_clean,
        n_noisy,
    })
}

pub fn breakdown_accuracy(model: &Model, data: &LabeledDataset) -> Result<AccuracyBreakdown> {
    breakdown_from_predictions(&predict(model, data.features()), data)
}

/// Bin index in `0..bins` for the half-open bin `((b - 1) / B, b / B]`.
fn confidence_bin(conf: f64, bins: usize) -> usize {
    let b = bins as f64;
    let mut idx = ((conf * b).ceil() as usize).clamp(1, bins);
    // make the product-based guess agree with the division-based edges
    while idx > 1 && conf <= (idx - 1) as f64 / b {
        idx -= 1;
    }
    while idx < bins && conf > idx as f64 / b {
        idx += 1;
    }
    idx - 1
}

/// Expected calibration error with `bins` equal-width confidence bins over
/// `(0, 1]`, confidence being the max class probability.
pub fn ece(probs: &DMatrix<f64>, labels: &[usize], bins: usize) -> Result<f64> {
    let n = probs.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("probabilities"));
    }
    if bins == 0 {
        return Err(Error::InvalidConfig("ece needs at least one bin".into()));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut correct = vec![0usize; bins];
    let mut row = vec![0.0; probs.ncols()];
    for i in 0..n {
        for (j, r) in row.iter_mut().enumerate() {
            *r = probs[(i, j)];
        }
        let pred = argmax_label(&row);
        let conf = row[pred];
        let b = confidence_bin(conf, bins);
        count[b] += 1;
        conf_sum[b] += conf;
        correct[b] += (pred == labels[i]) as usize;
    }
    let total: f64 = (0..bins)
        .filter(|b| count[*b] > 0)
        .map(|b| {
            let nb = count[b] as f64;
            (nb / n as f64) * (correct[b] as f64 / nb - conf_sum[b] / nb).abs()
        })
        .sum();
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Observed,
    Clean,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapScale {
    /// `p(y|x) - mean_y' p(y'|x)` on softmax probabilities.
    #[default]
    Probability,
    /// The same difference on raw logits.
    Logit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    All,
    Clean,
    Noisy,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::All => "all",
            Split::Clean => "clean",
            Split::Noisy => "noisy",
        }
    }
}

impl LabelSource {
    pub fn name(self) -> &'static str {
        match self {
            LabelSource::Observed => "observed",
            LabelSource::Clean => "clean",
        }
    }
}

/// Confidence gaps on the chosen part of the data, in example order.
pub fn logit_gaps(
    model: &Model,
    data: &LabeledDataset,
    source: LabelSource,
    split: Split,
    scale: GapScale,
) -> Result<Vec<f64>> {
    let labels = match source {
        LabelSource::Observed => data.observed_labels(),
        LabelSource::Clean => data.clean_labels().ok_or(Error::MissingCleanLabels)?,
    };
    let mask = match split {
        Split::All => None,
        _ => Some(data.noise_mask().ok_or(Error::MissingCleanLabels)?),
    };
    let l = model.num_classes();
    let mut f = vec![0.0; l];
    let mut p = vec![0.0; l];
    let mut scratch = Scratch::default();
    let mut out = Vec::new();
    for (i, x) in data.features().iter_rows().enumerate() {
        let keep = match (split, mask) {
            (Split::Clean, Some(m)) => !m[i],
            (Split::Noisy, Some(m)) => m[i],
            _ => true,
        };
        if !keep {
            continue;
        }
        model.forward_into(x, &mut f, &mut scratch);
        let v = match scale {
            GapScale::Probability => {
                softmax_into(&f, &mut p);
                &p
            }
            GapScale::Logit => &f,
        };
        let mean = v.iter().sum::<f64>() / l as f64;
        out.push(v[labels[i]] - mean);
    }
    Ok(out)
}

/// Probability gaps `p(y|x) - 1/L` for every example, `y` from `source`.
pub fn logit_gap_samples(model: &Model, data: &LabeledDataset, source: LabelSource) -> Result<Vec<f64>> {
    logit_gaps(model, data, source, Split::All, GapScale::Probability)
}

/// One-sided two-sample Kolmogorov-Smirnov statistic
/// `D = sup_x (F_a(x) - F_b(x))` and its asymptotic p-value for the
/// alternative "`a` is stochastically smaller than `b`".
pub fn ks_smaller(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max(i as f64 / n - j as f64 / m);
    }
    let p = (-2.0 * d * d * n * m / (n + m)).exp();
    (d, p)
}

/// A pre-logit vector projected onto the plane of three class templates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectedPoint {
    pub x: f64,
    pub y: f64,
    pub class: usize,
    pub noisy: bool,
}

/// Orthonormal basis of the plane through the output-weight rows of three
/// classes, centred on their mean.
#[derive(Clone, Debug)]
pub struct TemplatePlane {
    pub origin: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl TemplatePlane {
    pub fn new(model: &MlpModel, classes: [usize; 3]) -> Result<Self> {
        let l = model.output_weights.nrows();
        for &c in &classes {
            if c >= l {
                return Err(Error::IndexOutOfRange { index: c, classes: l });
            }
        }
        let [a, b, c] = classes;
        if a == b || b == c || a == c {
            return Err(Error::DegenerateBasis);
        }
        let row = |k: usize| -> Vec<f64> { model.output_weights.row(k).iter().copied().collect() };
        let (wa, wb, wc) = (row(a), row(b), row(c));
        let u1: Vec<f64> = wb.iter().zip(&wa).map(|(x, y)| x - y).collect();
        let u2: Vec<f64> = wc.iter().zip(&wa).map(|(x, y)| x - y).collect();
        let n1 = dot(&u1, &u1).sqrt();
        if n1 <= 1e-10 {
            return Err(Error::DegenerateBasis);
        }
        let e1: Vec<f64> = u1.iter().map(|v| v / n1).collect();
        let proj = dot(&u2, &e1);
        let r: Vec<f64> = u2.iter().zip(&e1).map(|(v, e)| v - proj * e).collect();
        let n2 = dot(&r, &r).sqrt();
        if n2 <= 1e-10 * dot(&u2, &u2).sqrt().max(1.0) {
            return Err(Error::DegenerateBasis);
        }
        let e2 = r.iter().map(|v| v / n2).collect();
        let origin = (0..wa.len()).map(|k| (wa[k] + wb[k] + wc[k]) / 3.0).collect();
        Ok(Self { origin, e1, e2 })
    }

    pub fn project(&self, h: &[f64]) -> (f64, f64) {
        let centred: Vec<f64> = h.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        (dot(&centred, &self.e1), dot(&centred, &self.e2))
    }
}

/// Projects the pre-logits of every example whose true label is one of
/// `classes` onto [`TemplatePlane`].
pub fn prelogit_projection(
    model: &MlpModel,
    data: &LabeledDataset,
    classes: [usize; 3],
) -> Result<Vec<ProjectedPoint>> {
    if model.hidden_weights.ncols() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.hidden_weights.ncols(),
            actual: data.dim(),
        });
    }
    let plane = TemplatePlane::new(model, classes)?;
    let truth = data.true_labels();
    let mask = data.noise_mask();
    Ok(data
        .features()
        .iter_rows()
        .enumerate()
        .filter(|(i, _)| classes.contains(&truth[*i]))
        .map(|(i, x)| {
            let (px, py) = plane.project(&model.prelogits(x));
            ProjectedPoint {
                x: px,
                y: py,
                class: truth[i],
                noisy: mask.is_some_and(|m| m[i]),
            }
        })
        .collect())
}

/// `(noisy, clean)` mean distances to the centroid of the clean points of
/// each point's true class. `None` when either group is empty.
pub fn noisy_centroid_distance(points: &[ProjectedPoint]) -> Option<(f64, f64)> {
    let mut centroids: Vec<(usize, f64, f64, usize)> = Vec::new();
    for p in points.iter().filter(|p| !p.noisy) {
        match centroids.iter_mut().find(|c| c.0 == p.class) {
            Some(c) => {
                c.1 += p.x;
                c.2 += p.y;
                c.3 += 1;
            }
            None => centroids.push((p.class, p.x, p.y, 1)),
        }
    }
    let centre = |class: usize| {
        centroids
            .iter()
            .find(|c| c.0 == class)
            .map(|c| (c.1 / c.3 as f64, c.2 / c.3 as f64))
    };
    let mean_dist = |noisy: bool| {
        let d: Vec<f64> = points
            .iter()
            .filter(|p| p.noisy == noisy)
            .filter_map(|p| centre(p.class).map(|(cx, cy)| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt()))
            .collect();
        (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
    };
    Some((mean_dist(true)?, mean_dist(false)?))
}

/// Full report: test accuracy against true labels, train breakdown and test ECE.
pub fn run_report(
    model: &Model,
    train: &LabeledDataset,
    test: &LabeledDataset,
    ece_bins: usize,
) -> Result<RunReport> {
    let b = breakdown_accuracy(model, train)?;
    let test_pred = predict(model, test.features());
    let hits = test_pred
        .iter()
        .zip(test.true_labels())
        .filter(|(a, b)| a == b)
        .count();
    let probs = predict_probs(model, test.features());
    Ok(RunReport {
        test_accuracy: fraction(hits, test.len()),
        train_accuracy_full_true: b.full_true,
        train_accuracy_clean_true: b.clean_true,
        train_accuracy_noisy_true: b.noisy_true,
        train_accuracy_noisy_observed: b.noisy_observed,
        ece: ece(&probs, test.true_labels(), ece_bins)?,
        gap_samples: None,
    })
}

/// Single-column CSV of gap samples.
pub fn write_gaps_csv<W: Write>(out: W, gaps: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gap"])?;
    for g in gaps {
        w.write_record([g.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `x,y,class,noisy` rows.
pub fn write_projection_csv<W: Write>(out: W, points: &[ProjectedPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "class", "noisy"])?;
    for p in points {
        w.write_record([
            p.x.to_string(),
            p.y.to_string(),
            p.class.to_string(),
            (p.noisy as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
