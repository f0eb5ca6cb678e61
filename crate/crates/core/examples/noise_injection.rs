//! Corrupts blob labels three ways and prints the observed flip matrices.

use labelsmear::noise::{empirical_flip_matrix, inject_class_conditional, inject_symmetric, SymmetricMode};
use labelsmear::synthlab::{make_blobs, random_centers, BlobSpec};
use labelsmear::TransitionMatrix;

fn main() -> labelsmear::Result<()> {
    let clean = make_blobs(&BlobSpec {
        centers: random_centers(3, 2, 1.0, 0),
        variance: 1.0,
        samples_per_class: 5000,
        seed: 0,
    })?;
    let asym = TransitionMatrix::from_rows(&[vec![0.9, 0.1, 0.0], vec![0.0, 0.8, 0.2], vec![0.3, 0.0, 0.7]])?;
    let runs = [
        ("resample-any rho=0.3", inject_symmetric(&clean, 0.3, SymmetricMode::ResampleAny, 1)?),
        ("flip-to-other rho=0.3", inject_symmetric(&clean, 0.3, SymmetricMode::FlipToOther, 1)?),
        ("class-conditional", inject_class_conditional(&clean, &asym, 1)?),
    ];
    for (name, noisy) in runs {
        println!("{name}: {} of {} labels changed", noisy.noisy_count(), noisy.len());
        println!("{:.3}", empirical_flip_matrix(&noisy)?);
    }
    Ok(())
}
