#![allow(dead_code)]

use labelsmear::smear::argmax_label;
use labelsmear::TransitionMatrix;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive random distribution over `l` outcomes.
pub fn distribution(r: &mut impl Rng, l: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..l).map(|_| r.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

pub fn logits(r: &mut impl Rng, l: usize, scale: f64) -> Vec<f64> {
    (0..l).map(|_| r.random_range(-scale..scale)).collect()
}

/// Diagonally dominant random row-stochastic matrix: `(1 - s) I + s R`
/// with `s < 1/2`, so it is comfortably invertible.
pub fn transition(r: &mut impl Rng, l: usize) -> TransitionMatrix {
    let s = r.random_range(0.0..0.45);
    let mut m = DMatrix::zeros(l, l);
    for i in 0..l {
        let row = distribution(r, l);
        for j in 0..l {
            m[(i, j)] = s * row[j] + if i == j { 1.0 - s } else { 0.0 };
        }
    }
    TransitionMatrix::new(m).unwrap()
}

/// `N x L` matrix of random probability rows.
pub fn prob_rows(r: &mut impl Rng, n: usize, l: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, l);
    for i in 0..n {
        let sharp = r.random_range(0.5..6.0);
        let f = logits(r, l, sharp);
        let p = labelsmear::losses::softmax(&f);
        for j in 0..l {
            m[(i, j)] = p[j];
        }
    }
    m
}

/// Central finite difference of `f` at `x`, coordinate by coordinate.
pub fn numeric_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let up = f(&y);
            y[i] = x[i] - h;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Bin-by-bin scan with edges computed by division.
pub fn ece_oracle(probs: &DMatrix<f64>, labels: &[usize], bins: usize) -> f64 {
    let n = probs.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| probs.row(i).iter().copied().collect()).collect();
    let mut total = 0.0;
    for b in 1..=bins {
        let (lo, hi) = ((b - 1) as f64 / bins as f64, b as f64 / bins as f64);
        let members: Vec<usize> = (0..n)
            .filter(|&i| {
                let c = rows[i][argmax_label(&rows[i])];
                lo < c && c <= hi
            })
            .collect();
        if members.is_empty() {
            continue;
        }
        let m = members.len() as f64;
        let acc = members.iter().filter(|&&i| argmax_label(&rows[i]) == labels[i]).count() as f64 / m;
        let conf = members.iter().map(|&i| rows[i][argmax_label(&rows[i])]).sum::<f64>() / m;
        total += m / n as f64 * (acc - conf).abs();
    }
    total
}
