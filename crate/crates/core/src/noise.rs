//! Synthetic label corruption and percentile-based transition estimation.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::smear::TransitionMatrix;

/// How a selected example's label is redrawn under symmetric noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymmetricMode {
    /// Uniform over all `L` classes; may coincide with the original label.
    #[default]
    ResampleAny,
    /// Uniform over the other `L - 1` classes.
    FlipToOther,
}

fn corrupted(data: &LabeledDataset, labels: Vec<usize>) -> Result<LabeledDataset> {
    LabeledDataset::with_clean(
        data.features().clone(),
        labels,
        data.observed_labels().to_vec(),
        data.num_classes(),
    )
}

fn ensure_clean_input(data: &LabeledDataset) -> Result<()> {
    if data.noise_mask().is_some() {
        return Err(Error::AlreadyCorrupted);
    }
    Ok(())
}

/// Selects each example with probability `rho` and redraws its label
/// according to `mode`. Example `i` draws only from RNG stream `i`.
pub fn inject_symmetric(
    data: &LabeledDataset,
    rho: f64,
    mode: SymmetricMode,
    seed: u64,
) -> Result<LabeledDataset> {
    ensure_clean_input(data)?;
    let l = data.num_classes();
    let bound = match mode {
        SymmetricMode::ResampleAny => 1.0,
        SymmetricMode::FlipToOther => 1.0 - 1.0 / l as f64,
    };
    if !(rho >= 0.0 && rho < bound) {
        return Err(Error::InvalidRho {
            rho,
            classes: l,
            reason: match mode {
                SymmetricMode::ResampleAny => "must lie in [0, 1)",
                SymmetricMode::FlipToOther => "must lie in [0, 1 - 1/L)",
            },
        });
    }
    let key = rng::derive(seed, Purpose::Noise);
    let labels: Vec<usize> = data
        .observed_labels()
        .par_iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut r = rng::stream(key, i as u64);
            if r.random::<f64>() >= rho {
                return y;
            }
            match mode {
                SymmetricMode::ResampleAny => r.random_range(0..l),
                SymmetricMode::FlipToOther => {
                    let k = r.random_range(0..l - 1);
                    if k >= y {
                        k + 1
                    } else {
                        k
                    }
                }
            }
        })
        .collect();
    corrupted(data, labels)
}

/// Resamples every label `y` from row `y` of `t`.
pub fn inject_class_conditional(
    data: &LabeledDataset,
    t: &TransitionMatrix,
    seed: u64,
) -> Result<LabeledDataset> {
    ensure_clean_input(data)?;
    let l = data.num_classes();
    if t.num_classes() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            actual: t.num_classes(),
        });
    }
    let cumulative: Vec<Vec<f64>> = (0..l)
        .map(|y| {
            t.row(y)
                .iter()
                .scan(0.0, |acc, p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    // rounding can leave a row's running sum just short of 1
    let last_positive: Vec<usize> = (0..l)
        .map(|y| (0..l).rposition(|k| t.get(y, k) > 0.0).unwrap_or(y))
        .collect();
    let key = rng::derive(seed, Purpose::Noise);
    let labels: Vec<usize> = data
        .observed_labels()
        .par_iter()
        .enumerate()
        .map(|(i, &y)| {
            let u: f64 = rng::stream(key, i as u64).random();
            // strict comparison never lands on a zero-probability target
            cumulative[y]
                .iter()
                .position(|c| u < *c)
                .unwrap_or_else(|| last_positive[y])
        })
        .collect();
    corrupted(data, labels)
}

/// Row `y` is the fraction of clean-`y` examples observed under each label.
/// Rows for classes with no clean examples are zero.
pub fn empirical_flip_matrix(data: &LabeledDataset) -> Result<DMatrix<f64>> {
    let clean = data.clean_labels().ok_or(Error::MissingCleanLabels)?;
    let l = data.num_classes();
    let mut counts = DMatrix::<f64>::zeros(l, l);
    for (&c, &o) in clean.iter().zip(data.observed_labels()) {
        counts[(c, o)] += 1.0;
    }
    for mut row in counts.row_iter_mut() {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row /= s;
        }
    }
    Ok(counts)
}

/// Nearest-rank position (1-based) of `percentile` among `n` sorted values.
fn nearest_rank(percentile: f64, n: usize) -> usize {
    ((percentile / 100.0 * n as f64).ceil() as usize).clamp(1, n)
}

/// For each class `j`, takes the example whose predicted probability for `j`
/// sits at `percentile` (nearest rank, ties to the lowest example index) and
/// uses its full predicted distribution, renormalised, as row `j`.
pub fn estimate_transition_percentile(probs: &DMatrix<f64>, percentile: f64) -> Result<TransitionMatrix> {
    let (n, l) = probs.shape();
    if n == 0 || l == 0 {
        return Err(Error::EmptyInput("probability matrix"));
    }
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::InvalidPercentile(percentile));
    }
    for i in 0..n {
        let s: f64 = probs.row(i).iter().sum();
        if (s - 1.0).abs() > 1e-6 || probs.row(i).iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidDistribution(format!("row {i} sums to {s}")));
        }
    }
    let rank = nearest_rank(percentile, n);
    let mut est = DMatrix::<f64>::zeros(l, l);
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..l {
        let col = probs.column(j);
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
        let target = col[order[rank - 1]];
        let pick = (0..n).find(|&i| col[i] == target).expect("value present");
        let row = probs.row(pick);
        let s: f64 = row.iter().sum();
        for k in 0..l {
            est[(j, k)] = row[k] / s;
        }
    }
    TransitionMatrix::new(est)
}
