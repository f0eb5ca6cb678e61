//! Closed-form views of smoothing as shrinkage.

use nalgebra::DMatrix;

use super::model::LinearModel;
use crate::dataset::Features;
use crate::error::{Error, Result};
use crate::linalg;
use crate::losses::{log_sum_exp, softmax_into};

/// Square-loss regression on smoothed one-hot targets, solved in closed form:
///
/// `W_bar = (1 - alpha) W* + (alpha / L) (X^T X)^-1 X^T J`, returned `L x D`.
///
/// For column-centred `X` the second term vanishes and this is a pure
/// shrinkage of the least-squares solution `W*`.
pub fn closed_form_smoothed_least_squares(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.nrows(),
        });
    }
    let l = y.ncols();
    let gram = x.transpose() * x;
    let (gram_inv, _) = linalg::guarded_inverse(&gram).map_err(Error::SingularDesign)?;
    let pinv = gram_inv * x.transpose();
    let w_star = &pinv * y;
    let ones = DMatrix::from_element(x.nrows(), l, 1.0);
    let offset = &pinv * ones;
    let w_bar = w_star * (1.0 - alpha) + offset * (alpha / l as f64);
    Ok(w_bar.transpose())
}

/// `E_x[L * logsumexp(f(x)) - sum(f(x))]` for a linear model.
pub fn omega_linear(model: &LinearModel, features: &Features) -> f64 {
    let l = model.num_classes();
    let mut f = vec![0.0; l];
    let total: f64 = features
        .iter_rows()
        .map(|x| {
            logits(model, x, &mut f);
            l as f64 * log_sum_exp(&f) - f.iter().sum::<f64>()
        })
        .sum();
    total / features.rows() as f64
}

fn logits(model: &LinearModel, x: &[f64], out: &mut [f64]) {
    match &model.bias {
        Some(b) => out.copy_from_slice(b),
        None => out.fill(0.0),
    }
    for (j, xv) in x.iter().enumerate() {
        for (i, o) in out.iter_mut().enumerate() {
            *o += model.weights[(i, j)] * xv;
        }
    }
}

/// Gradient of [`omega_linear`] with respect to `W`: row `i` is
/// `E_x[(L * softmax(W x)_i - 1) x]`. Zero at `W = 0`.
pub fn omega_gradient_at(model: &LinearModel, features: &Features) -> Result<DMatrix<f64>> {
    if features.cols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: features.cols(),
        });
    }
    if features.rows() == 0 {
        return Err(Error::EmptyInput("feature sample"));
    }
    let l = model.num_classes();
    let mut f = vec![0.0; l];
    let mut p = vec![0.0; l];
    let mut grad = DMatrix::<f64>::zeros(l, model.input_dim());
    for x in features.iter_rows() {
        logits(model, x, &mut f);
        softmax_into(&f, &mut p);
        for (j, xv) in x.iter().enumerate() {
            for i in 0..l {
                grad[(i, j)] += (l as f64 * p[i] - 1.0) * xv;
            }
        }
    }
    Ok(grad / features.rows() as f64)
}
