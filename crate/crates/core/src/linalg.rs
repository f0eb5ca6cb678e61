//! Small dense helpers on top of `nalgebra`.

use nalgebra::DMatrix;

/// Matrices whose 1-norm condition estimate exceeds this are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

pub fn norm_one(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse of `a` together with its 1-norm condition number.
///
/// Returns `Err(cond)` when the LU factorisation breaks down or the
/// condition number exceeds [`CONDITION_LIMIT`].
pub fn guarded_inverse(a: &DMatrix<f64>) -> std::result::Result<(DMatrix<f64>, f64), f64> {
    let inv = match a.clone().lu().try_inverse() {
        Some(inv) => inv,
        None => return Err(f64::INFINITY),
    };
    let cond = norm_one(a) * norm_one(&inv);
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(cond);
    }
    Ok((inv, cond))
}

pub fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

/// `(1 - a) I + (a / n) J`, the shape shared by smoothing and symmetric noise.
pub fn identity_plus_uniform(n: usize, a: f64) -> DMatrix<f64> {
    let off = a / n as f64;
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 - a + off } else { off })
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
