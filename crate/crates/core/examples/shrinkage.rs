//! Smoothing as shrinkage: least squares on smoothed targets scales the
//! centred solution by `1 - alpha`, and the uniform-prediction penalty is
//! flat at zero weights.

use labelsmear::dataset::Features;
use labelsmear::synthlab::{make_blobs, random_centers, BlobSpec};
use labelsmear::training::{closed_form_smoothed_least_squares, omega_gradient_at, omega_linear, LinearModel};
use nalgebra::DMatrix;

fn main() -> labelsmear::Result<()> {
    let data = make_blobs(&BlobSpec {
        centers: random_centers(3, 4, 2.0, 11),
        variance: 0.5,
        samples_per_class: 100,
        seed: 11,
    })?;
    let mut features = data.features().clone();
    features.center();
    let x = features.to_matrix();
    let y = DMatrix::from_fn(data.len(), 3, |i, k| if data.observed_labels()[i] == k { 1.0 } else { 0.0 });

    let w0 = closed_form_smoothed_least_squares(&x, &y, 0.0)?;
    for alpha in [0.0, 0.2, 0.5, 0.9] {
        let w = closed_form_smoothed_least_squares(&x, &y, alpha)?;
        println!("alpha {alpha}: |W| = {:.4}, |W|/|W*| = {:.4}", w.norm(), w.norm() / w0.norm());
    }

    let zero = LinearModel::zeros(3, 4, false);
    let some = LinearModel {
        weights: w0.clone(),
        bias: None,
    };
    let f = Features::from_matrix(&x);
    println!("omega(0) = {:.4}, omega(W*) = {:.4}", omega_linear(&zero, &f), omega_linear(&some, &f));
    println!("max |grad omega(0)| = {:e}", omega_gradient_at(&zero, &f)?.amax());
    Ok(())
}
