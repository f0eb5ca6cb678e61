//! Two Gaussian blobs with one-sided label noise: the noisy labels push the
//! separator off the origin, and both smoothing and l2 pull it back.

use labelsmear::synthlab::{figure5_experiment, Figure5Config};

fn main() -> labelsmear::Result<()> {
    for row in figure5_experiment(&Figure5Config::default())? {
        println!(
            "{:<10} {:<5} offset {:+.4} +- {:.4}",
            row.setting.name(),
            row.value,
            row.offset_mean(),
            row.offset_std()
        );
    }
    Ok(())
}
