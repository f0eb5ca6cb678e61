//! Smearing and noise-transition matrices.
//!
//! A smearing matrix `M` turns the per-class loss vector `l(f)` into `M l(f)`;
//! the loss on a labelled example `(x, y)` becomes `e_y^T M l(f(x))`. Standard
//! training, label smoothing and backward correction are all instances:
//!
//! | method    | matrix                                   |
//! |-----------|------------------------------------------|
//! | standard  | `I`                                      |
//! | smoothing | `(1 - a) I + (a / L) J`                  |
//! | backward  | `T^-1`, symmetric: `(I - (a / L) J) / (1 - a)` |
//!
//! Forward correction acts on predictions rather than losses, so it is only
//! carried here as a tag around `T`; see [`crate::losses`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::MAX_CLASSES;

/// Row sums of constructed matrices must match 1 this closely.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance accepted on user-supplied transition rows before renormalising.
pub const INPUT_ROW_SUM_TOL: f64 = 1e-9;
/// Closed-form backward matrices must agree with the general inverse this closely.
pub const CLOSED_FORM_TOL: f64 = 1e-10;

fn check_classes(l: usize) -> Result<()> {
    if !(2..=MAX_CLASSES).contains(&l) {
        return Err(Error::InvalidClassCount(l));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Row-stochastic class-conditional noise matrix: label `y` is flipped to
/// `y'` with probability `T[y, y']`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    entries: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Validates a square matrix with entries in `[0, 1]` and rows summing to
    /// one within [`INPUT_ROW_SUM_TOL`]. Rows are renormalised so the stored
    /// matrix meets [`ROW_SUM_TOL`].
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                actual: entries.ncols(),
            });
        }
        check_classes(entries.nrows())?;
        let mut entries = entries;
        for mut row in entries.row_iter_mut() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
                return Err(Error::InvalidTransition("entries must lie in [0, 1]".into()));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > INPUT_ROW_SUM_TOL {
                return Err(Error::InvalidTransition(format!("row sums to {s}")));
            }
            row /= s;
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput("transition matrix"));
        }
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: r.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(num_classes: usize) -> Result<Self> {
        check_classes(num_classes)?;
        Ok(Self {
            entries: linalg::identity(num_classes),
        })
    }

    /// Symmetric noise with flip probability `rho`: every label moves to each
    /// of the other `L - 1` classes with probability `rho / (L - 1)`.
    pub fn symmetric(num_classes: usize, rho: f64) -> Result<Self> {
        check_classes(num_classes)?;
        let l = num_classes as f64;
        if rho.is_nan() || rho < 0.0 {
            return Err(Error::InvalidRho {
                rho,
                classes: num_classes,
                reason: "must be non-negative",
            });
        }
        if rho >= 1.0 - 1.0 / l {
            return Err(Error::InvalidRho {
                rho,
                classes: num_classes,
                reason: "must be below 1 - 1/L",
            });
        }
        Self::symmetric_from_alpha(num_classes, l / (l - 1.0) * rho)
    }

    /// `(1 - alpha) I + (alpha / L) J` for `alpha` in `[0, 1)`, the
    /// parameterisation used when loss correction treats `alpha` as a knob.
    pub fn symmetric_from_alpha(num_classes: usize, alpha: f64) -> Result<Self> {
        check_classes(num_classes)?;
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidAlpha(alpha));
        }
        Ok(Self {
            entries: linalg::identity_plus_uniform(num_classes, alpha),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[(from, to)]
    }

    pub fn row(&self, from: usize) -> Vec<f64> {
        self.entries.row(from).iter().copied().collect()
    }

    /// `T^T p`: the noisy class-probabilities induced by clean ones.
    pub fn corrupt_distribution(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_len(self.num_classes(), p.len())?;
        let l = self.num_classes();
        Ok((0..l)
            .map(|j| (0..l).map(|k| self.entries[(k, j)] * p[k]).sum())
            .collect())
    }

    /// If `T = (1 - a) I + (a / L) J` for some `a`, returns that `a`.
    pub fn symmetric_alpha(&self) -> Option<f64> {
        let l = self.num_classes();
        let off = if l > 1 { self.entries[(0, 1)] } else { 0.0 };
        let diag = self.entries[(0, 0)];
        let uniform = (0..l).all(|i| {
            (0..l).all(|j| {
                let want = if i == j { diag } else { off };
                self.entries[(i, j)] == want
            })
        });
        uniform.then_some(off * l as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SmearingMethod {
    Standard,
    Smoothing,
    Backward,
    /// Tag only: the entries hold `T` and the loss applies it to predictions.
    Forward,
}

impl SmearingMethod {
    pub fn name(self) -> &'static str {
        match self {
            SmearingMethod::Standard => "standard",
            SmearingMethod::Smoothing => "smoothing",
            SmearingMethod::Backward => "backward",
            SmearingMethod::Forward => "forward",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmearingMatrix {
    entries: DMatrix<f64>,
    method: SmearingMethod,
    /// `None` for backward matrices built from a non-symmetric `T`.
    alpha: Option<f64>,
}

impl SmearingMatrix {
    pub fn standard(num_classes: usize) -> Result<Self> {
        check_classes(num_classes)?;
        Ok(Self {
            entries: linalg::identity(num_classes),
            method: SmearingMethod::Standard,
            alpha: Some(0.0),
        })
    }

    pub fn forward_tag(t: &TransitionMatrix) -> Self {
        Self {
            entries: t.entries.clone(),
            method: SmearingMethod::Forward,
            alpha: t.symmetric_alpha(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn method(&self) -> SmearingMethod {
        self.method
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.entries.row(i).iter().sum()
    }
}

/// `(1 - alpha) I + (alpha / L) J`.
pub fn make_smoothing_matrix(num_classes: usize, alpha: f64) -> Result<SmearingMatrix> {
    check_classes(num_classes)?;
    check_alpha(alpha)?;
    Ok(SmearingMatrix {
        entries: linalg::identity_plus_uniform(num_classes, alpha),
        method: SmearingMethod::Smoothing,
        alpha: Some(alpha),
    })
}

/// Symmetric noise matrix with flip probability `rho`; see
/// [`TransitionMatrix::symmetric`].
pub fn make_symmetric_transition(num_classes: usize, rho: f64) -> Result<TransitionMatrix> {
    TransitionMatrix::symmetric(num_classes, rho)
}

/// Closed form `(I - (a / L) J) / (1 - a)` of the inverse of a symmetric `T`.
pub fn symmetric_backward_closed_form(num_classes: usize, alpha: f64) -> DMatrix<f64> {
    let l = num_classes as f64;
    let scale = 1.0 / (1.0 - alpha);
    let off = -scale * alpha / l;
    DMatrix::from_fn(num_classes, num_classes, |i, j| {
        if i == j {
            scale + off
        } else {
            off
        }
    })
}

/// `M = T^-1`. Symmetric `T` uses the closed form, which is cross-checked
/// against the general inverse.
pub fn make_backward_matrix(t: &TransitionMatrix) -> Result<SmearingMatrix> {
    let (general, _cond) = linalg::guarded_inverse(&t.entries).map_err(Error::SingularMatrix)?;
    let alpha = t.symmetric_alpha();
    let entries = match alpha {
        Some(a) => {
            let closed = symmetric_backward_closed_form(t.num_classes(), a);
            let diff = linalg::max_abs_diff(&closed, &general);
            debug_assert!(diff <= CLOSED_FORM_TOL, "closed form off by {diff}");
            if diff > CLOSED_FORM_TOL {
                general
            } else {
                closed
            }
        }
        None => general,
    };
    Ok(SmearingMatrix {
        entries,
        method: SmearingMethod::Backward,
        alpha,
    })
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// Checks that `p` is a probability vector (entries >= 0, sum 1 within `tol`).
pub fn check_distribution(p: &[f64], tol: f64) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidDistribution("negative or non-finite entry".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(Error::InvalidDistribution(format!("sums to {s}")));
    }
    Ok(())
}

/// The distribution `M^T p` that a smeared loss effectively fits.
pub fn smear_distribution(m: &SmearingMatrix, p: &[f64]) -> Result<Vec<f64>> {
    let l = m.num_classes();
    check_len(l, p.len())?;
    check_distribution(p, 1e-9)?;
    Ok((0..l)
        .map(|j| (0..l).map(|k| m.entries[(k, j)] * p[k]).sum())
        .collect())
}

/// Index of the largest entry; ties go to the lowest index.
///
/// # Panics
/// On an empty slice.
pub fn argmax_label(p: &[f64]) -> usize {
    assert!(!p.is_empty(), "argmax of empty vector");
    let mut best = 0;
    for (i, v) in p.iter().enumerate().skip(1) {
        if *v > p[best] {
            best = i;
        }
    }
    best
}
