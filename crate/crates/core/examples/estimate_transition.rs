//! Trains a standard-loss model on noisy labels and reads the transition
//! matrix back off its most confident predictions.

use labelsmear::metrics::predict_probs;
use labelsmear::noise::{empirical_flip_matrix, estimate_transition_percentile, inject_symmetric, SymmetricMode};
use labelsmear::synthlab::{make_blobs, random_centers, BlobSpec};
use labelsmear::training::{train, LinearModel, TrainConfig};
use labelsmear::LossSpec;

fn main() -> labelsmear::Result<()> {
    let clean = make_blobs(&BlobSpec {
        centers: random_centers(4, 8, 1.5, 3),
        variance: 1.0,
        samples_per_class: 500,
        seed: 3,
    })?;
    let noisy = inject_symmetric(&clean, 0.3, SymmetricMode::ResampleAny, 3)?;
    let cfg = TrainConfig {
        epochs: 30,
        lr_drop_epochs: vec![20],
        ..TrainConfig::default()
    };
    let (model, _) = train(LinearModel::zeros(4, 8, true).into(), &noisy, &LossSpec::standard(), &cfg)?;
    let probs = predict_probs(&model, noisy.features());
    for p in [90.0, 97.0, 99.9] {
        let t = estimate_transition_percentile(&probs, p)?;
        println!("percentile {p}:\n{:.3}", t.entries());
    }
    println!("observed flips:\n{:.3}", empirical_flip_matrix(&noisy)?);
    Ok(())
}
