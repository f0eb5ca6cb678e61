use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense row-major `N x D` feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let data = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .collect();
        Self { rows, cols, data }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Subtracts the column means in place and returns them.
    pub fn center(&mut self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for r in self.data.chunks_exact(self.cols) {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        for m in means.iter_mut() {
            *m /= self.rows as f64;
        }
        for r in self.data.chunks_exact_mut(self.cols) {
            for (v, m) in r.iter_mut().zip(&means) {
                *v -= m;
            }
        }
        means
    }
}

/// Features plus observed labels, optionally with the clean labels they were
/// corrupted from.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Features,
    observed_labels: Vec<usize>,
    clean_labels: Option<Vec<usize>>,
    noise_mask: Option<Vec<bool>>,
    num_classes: usize,
}

fn check_labels(labels: &[usize], num_classes: usize) -> Result<()> {
    match labels.iter().find(|y| **y >= num_classes) {
        Some(&index) => Err(Error::IndexOutOfRange {
            index,
            classes: num_classes,
        }),
        None => Ok(()),
    }
}

impl LabeledDataset {
    pub fn new(features: Features, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if !(2..=crate::MAX_CLASSES).contains(&num_classes) {
            return Err(Error::InvalidClassCount(num_classes));
        }
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                actual: labels.len(),
            });
        }
        check_labels(&labels, num_classes)?;
        Ok(Self {
            features,
            observed_labels: labels,
            clean_labels: None,
            noise_mask: None,
            num_classes,
        })
    }

    /// A dataset whose observed labels were corrupted from `clean`; the noise
    /// mask is derived from where the two differ.
    pub fn with_clean(
        features: Features,
        observed: Vec<usize>,
        clean: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let mut data = Self::new(features, observed, num_classes)?;
        if clean.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                actual: clean.len(),
            });
        }
        check_labels(&clean, num_classes)?;
        data.noise_mask = Some(
            data.observed_labels
                .iter()
                .zip(&clean)
                .map(|(a, b)| a != b)
                .collect(),
        );
        data.clean_labels = Some(clean);
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.observed_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed_labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn observed_labels(&self) -> &[usize] {
        &self.observed_labels
    }

    pub fn clean_labels(&self) -> Option<&[usize]> {
        self.clean_labels.as_deref()
    }

    pub fn noise_mask(&self) -> Option<&[bool]> {
        self.noise_mask.as_deref()
    }

    /// Clean labels when known, otherwise the observed ones.
    pub fn true_labels(&self) -> &[usize] {
        self.clean_labels.as_deref().unwrap_or(&self.observed_labels)
    }

    pub fn noisy_count(&self) -> usize {
        self.noise_mask
            .as_ref()
            .map_or(0, |m| m.iter().filter(|b| **b).count())
    }

    /// Same dataset with the corruption forgotten: the clean labels become the
    /// observed ones.
    pub fn cleaned(&self) -> Self {
        Self {
            features: self.features.clone(),
            observed_labels: self.true_labels().to_vec(),
            clean_labels: None,
            noise_mask: None,
            num_classes: self.num_classes,
        }
    }

    pub fn map_features(&self, f: impl FnOnce(&Features) -> Features) -> Result<Self> {
        let features = f(&self.features);
        if features.rows() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: features.rows(),
            });
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    /// Examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
        }
        let pick = |v: &[usize]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            features: Features {
                rows: indices.len(),
                cols: d,
                data,
            },
            observed_labels: pick(&self.observed_labels),
            clean_labels: self.clean_labels.as_deref().map(pick),
            noise_mask: self
                .noise_mask
                .as_ref()
                .map(|m| indices.iter().map(|&i| m[i]).collect()),
            num_classes: self.num_classes,
        }
    }
}
